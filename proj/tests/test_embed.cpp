#include "doctest.h"

#include <filesystem>

#include "btembed/embed.hpp"
#include "btembed/error.hpp"
#include "btembed/harness.hpp"

using namespace bt;

namespace {

// Per-node matrix chain, accumulated left to right from the root.
Eigen::VectorXd explicit_encode(const Tree& t, const Embedding& e) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(e.dim());
  for (const auto& [path, label] : enumerate_nodes(t)) {
    Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(e.dim(), e.dim());
    for (auto a : path) chain = chain * e.attr(a);
    sum += chain * e.token(label).transpose();
  }
  return sum;
}

double max_abs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Tree chain_tree(const std::vector<TokenId>& xs, AttrId next) {
  Tree t(xs.back());
  for (auto i = xs.size() - 1; i-- > 0;) t = Tree(xs[i], {{next, t}});
  return t;
}

}  // namespace

TEST_CASE("embedding is deterministic and well formed") {
  auto s = generated_schema(20, 3);
  auto a = make_embedding(s, 300, 7);
  auto b = make_embedding(s, 300, 7);
  CHECK(a.token_matrix() == b.token_matrix());
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.attr(AttrId(j)) == b.attr(AttrId(j)));
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != make_embedding(s, 300, 8).fingerprint());

  for (Eigen::Index i = 0; i < a.token_matrix().rows(); ++i)
    CHECK(a.token_matrix().row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(1);
  Eigen::VectorXd x = random_unit_vector(300, rng);
  for (const auto& m : a.attr_matrices()) {
    CHECK((m * x).norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((m.transpose() * m - Eigen::MatrixXd::Identity(300, 300)).cwiseAbs().maxCoeff() <
          1e-9);
  }

  // adding tokens must not disturb existing streams
  auto bigger = make_embedding(generated_schema(25, 3), 300, 7);
  CHECK(bigger.token_matrix().row(3) == a.token_matrix().row(3));

  CHECK_THROWS_AS(make_embedding(s, 1, 7), Error);
}

TEST_CASE("haar matrices have zero mean entries") {
  Rng rng(2024);
  double sum = 0;
  const int N = 1000;
  for (int i = 0; i < N; ++i) {
    auto q = haar_orthogonal(8, rng);
    CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(q.colwise().norm().minCoeff() == doctest::Approx(1.0).epsilon(1e-9));
    sum += q(0, 0);
  }
  CHECK(std::abs(sum / N) < 0.05);
}

TEST_CASE("encoding matches explicit path products") {
  auto s = generated_schema(30, 4);
  auto e = make_embedding(s, 120, 5);
  Tree one(TokenId{0});
  CHECK(bt_encode(one, e).data == e.token(TokenId{0}).transpose());

  Tree two(TokenId{0}, {{AttrId{2}, Tree(TokenId{1})}});
  Eigen::VectorXd expect = e.token(TokenId{0}).transpose() +
                           e.attr(AttrId{2}) * e.token(TokenId{1}).transpose();
  CHECK(max_abs(bt_encode(two, e).data, expect) < 1e-12);

  Rng rng(17);
  for (int i = 0; i < 10; ++i) {
    auto t = random_tree(10, 30, 4, rng);
    CHECK(max_abs(bt_encode(t, e).data, explicit_encode(t, e)) < 1e-10);
  }
}

TEST_CASE("cardinality estimate") {
  auto s = generated_schema(100, 4);
  auto small = make_embedding(s, 50, 1);
  CHECK(cardinality_estimate(bt_encode(Tree(TokenId{3}), small)) == 1);
  CHECK(cardinality_estimate(small.zero()) == 0);

  auto e = make_embedding(s, 2000, 99);
  Rng rng(4);
  int hits = 0;
  for (int i = 0; i < 100; ++i) {
    auto t = random_tree(12, 100, 4, rng);
    hits += cardinality_estimate(bt_encode(t, e)) == 12;
  }
  // |v|^2 = n + 2 sum_{i<j} <x_i, x_j>, the cross terms having variance 1/d
  // each, so round(|v|^2) == n holds with probability P(|Z| < 0.5 / sigma),
  // sigma^2 = 2 n (n - 1) / d: about 0.83 here.
  const double sigma = std::sqrt(2.0 * 12 * 11 / 2000);
  const double p = std::erf(0.5 / sigma / std::sqrt(2.0));
  MESSAGE("12-node cardinality hits: " << hits << "/100, predicted " << 100 * p);
  CHECK(std::abs(hits - 100 * p) < 4 * std::sqrt(100 * p * (1 - p)));
}

TEST_CASE("attach agrees with encoding the composed tree") {
  auto s = generated_schema(20, 3);
  auto e = make_embedding(s, 80, 12);
  Rng rng(8);

  Tree t1(TokenId{1});
  auto v1 = bt_encode(t1, e);
  auto v2 = bt_encode(Tree(TokenId{2}), e);
  Eigen::VectorXd expect = v1.data + e.attr(AttrId{1}) * v2.data;
  CHECK(max_abs(attach(v1, {}, AttrId{1}, v2, e).data, expect) < 1e-12);
  CHECK(attach(v1, {}, AttrId{1}, e.zero(), e).data == v1.data);

  for (int i = 0; i < 25; ++i) {
    auto a = random_tree(1 + rng.below(8), 20, 3, rng);
    auto b = random_tree(1 + rng.below(8), 20, 3, rng);
    // pick a leaf and a free attribute on it
    std::vector<Path> leaves;
    for (const auto& [p, _] : enumerate_nodes(a)) {
      const Tree* n = &a;
      for (auto x : p) n = n->child(x);
      if (n->children().empty()) leaves.push_back(p);
    }
    auto leaf = leaves[rng.below(leaves.size())];
    auto attr = static_cast<AttrId>(rng.below(3));
    auto composed = a.attached(leaf, attr, b);
    auto via = attach(bt_encode(a, e), leaf, attr, bt_encode(b, e), e);
    CHECK(max_abs(via.data, bt_encode(composed, e).data) < 1e-9);
  }
}

TEST_CASE("lists and push") {
  auto s = generated_schema(50, 1);
  auto e = make_embedding(s, 200, 3);
  AttrId next{0};
  std::vector<TokenId> one{TokenId{4}};
  CHECK(encode_list(one, e, next).data == e.token(TokenId{4}).transpose());
  std::vector<TokenId> two{TokenId{4}, TokenId{9}};
  Eigen::VectorXd expect =
      e.token(TokenId{4}).transpose() + e.attr(next) * e.token(TokenId{9}).transpose();
  CHECK(max_abs(encode_list(two, e, next).data, expect) < 1e-12);

  Rng rng(6);
  std::vector<TokenId> xs;
  for (int i = 0; i < 8; ++i) xs.push_back(TokenId(rng.below(50)));
  CHECK(max_abs(encode_list(xs, e, next).data, bt_encode(chain_tree(xs, next), e).data) < 1e-9);

  CHECK(push(e.zero(), TokenId{7}, e, next).data == e.token(TokenId{7}).transpose());
  std::vector<TokenId> tail{TokenId{2}, TokenId{3}}, full{TokenId{1}, TokenId{2}, TokenId{3}};
  CHECK(max_abs(push(encode_list(tail, e, next), TokenId{1}, e, next).data,
                encode_list(full, e, next).data) < 1e-9);

  auto v = e.zero();
  for (int i = 0; i < 16; ++i) v = push(v, TokenId(rng.below(50)), e, next);
  CHECK(v.data.squaredNorm() == doctest::Approx(16.0).epsilon(0.25));
}

TEST_CASE("foreign vectors are rejected") {
  auto s = generated_schema(10, 2);
  auto e1 = make_embedding(s, 64, 1);
  auto e2 = make_embedding(s, 64, 2);
  auto v = bt_encode(Tree(TokenId{1}), e1);
  try {
    (void)attach(v, {}, AttrId{0}, v, e2);
    FAIL("mismatch accepted");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::SchemaMismatch);
  }
}

TEST_CASE("binary files round trip") {
  auto dir = std::filesystem::temp_directory_path();
  auto s = generated_schema(12, 3);
  auto e = make_embedding(s, 40, 77);
  auto ef = (dir / "bt_test.bte").string();
  auto vf = (dir / "bt_test.btv").string();
  save_embedding(e, ef);
  auto back = load_embedding(ef);
  CHECK(back.schema() == s);
  CHECK(back.fingerprint() == e.fingerprint());
  CHECK(back.token_matrix() == e.token_matrix());
  CHECK(back.attr(AttrId{2}) == e.attr(AttrId{2}));

  auto v = bt_encode(Tree(TokenId{5}, {{AttrId{1}, Tree(TokenId{6})}}), e);
  save_vector(v, vf);
  auto w = load_vector(vf);
  CHECK(w.data == v.data);
  CHECK(w.fingerprint == v.fingerprint);
}

TEST_CASE("12-node cardinality is exact in 99 of 100 trials" * doctest::may_fail()) {
  auto e = make_embedding(generated_schema(100, 4), 2000, 99);
  Rng rng(4);
  int hits = 0;
  for (int i = 0; i < 100; ++i)
    hits += cardinality_estimate(bt_encode(random_tree(12, 100, 4, rng), e)) == 12;
  CHECK(hits >= 99);
}
