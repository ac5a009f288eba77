// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Every instance is seeded, so reruns print identical numbers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "btembed/decode.hpp"
#include "btembed/embed.hpp"
#include "btembed/error.hpp"
#include "btembed/harness.hpp"
#include "btembed/parse.hpp"
#include "btembed/transformer.hpp"

using namespace bt;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... xs) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

double max_abs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

std::vector<Path> leaves(const Tree& t) {
  std::vector<Path> out;
  for (const auto& [p, _] : enumerate_nodes(t)) {
    const Tree* n = &t;
    for (auto a : p) n = n->child(a);
    if (n->children().empty()) out.push_back(p);
  }
  return out;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void round_trip_and_cardinality() {
  Timer clock;
  const auto e = make_embedding(generated_schema(100, 4), 2000, 1001);
  Rng rng(derive_seed(1001, {7}));
  int exact = 0, counted = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    auto t = random_tree(1 + rng.below(16), 100, 4, rng);
    auto v = bt_encode(t, e);
    auto back = decode(v, e);
    exact += back && *back == t;
    counted += cardinality_estimate(v) == node_count(t);
  }
  report(exact >= 0.99 * trials, "round-trip d=2000 l<=16",
         fmt("%d/%d exact (need >= 99%%), %.1fs", exact, trials, clock.seconds()));
  report(counted >= 0.99 * trials, "cardinality",
         fmt("%d/%d with round(|v|^2) == nodes (need >= 99%%)", counted, trials));
}

void lists() {
  Timer clock;
  const auto e = make_embedding(generated_schema(100, 1), 1000, 1002);
  Rng rng(derive_seed(1002, {7}));
  int ok = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::vector<TokenId> xs(1 + rng.below(8));
    for (auto& x : xs) x = TokenId(rng.below(100));
    auto back = decode(encode_list(xs, e, AttrId{0}), e);
    bool good = back.has_value();
    const Tree* n = back ? &*back : nullptr;
    for (std::size_t k = 0; good && k < xs.size(); ++k) {
      good = n && n->label() == xs[k] &&
             n->children().size() == (k + 1 < xs.size() ? 1u : 0u);
      if (good && k + 1 < xs.size()) n = n->child(AttrId{0});
    }
    ok += good;
  }
  report(ok >= 0.99 * trials, "lists d=1000 l<=8",
         fmt("%d/%d exact (need >= 99%%), %.1fs", ok, trials, clock.seconds()));
}

void failure_regime() {
  SweepSpec s;
  s.kind = SweepKind::Trees;
  s.dims = {100};
  s.sizes = {25};
  s.trials = 100;
  s.seed = 1003;
  auto cell = run_sweep(s).at(0);
  report(cell.success_rate < 0.5, "failure regime d=100 l=25",
         fmt("success rate %.2f (need < 0.50)", cell.success_rate));
}

void linearity() {
  const auto e = make_embedding(generated_schema(50, 4), 500, 1004);
  Rng rng(derive_seed(1004, {7}));
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    auto a = random_tree(1 + rng.below(10), 50, 4, rng);
    auto b = random_tree(1 + rng.below(10), 50, 4, rng);
    auto ls = leaves(a);
    auto leaf = ls[rng.below(ls.size())];
    auto attr = static_cast<AttrId>(rng.below(4));
    auto composed = bt_encode(a.attached(leaf, attr, b), e);
    auto via = attach(bt_encode(a, e), leaf, attr, bt_encode(b, e), e);
    worst = std::max(worst, max_abs(via.data, composed.data));
  }
  report(worst <= 1e-9, "linearity", fmt("max |attach - encode| = %.2e over 100 (need <= 1e-9)", worst));
}

void push_identity() {
  const auto e = make_embedding(generated_schema(100, 1), 1000, 1005);
  Rng rng(derive_seed(1005, {7}));
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<TokenId> xs(1 + rng.below(16));
    for (auto& x : xs) x = TokenId(rng.below(100));
    auto v = e.zero();
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) v = push(v, *it, e, AttrId{0});
    worst = std::max(worst, max_abs(v.data, encode_list(xs, e, AttrId{0}).data));
  }
  report(worst <= 1e-9, "push", fmt("max |push^n - list| = %.2e over 100 (need <= 1e-9)", worst));
}

void transformer() {
  Timer clock;
  const auto e = make_embedding(generated_schema(100, 4), 2000, 1006);
  Rng rng(derive_seed(1006, {7}));
  const std::size_t capacity = 6;

  XfConfig cfg;
  XfConfig hard = cfg;
  hard.gate_constant *= 2;
  hard.attn_sharpness *= 2;
  std::optional<PathDecoder> base, doubled;
  try {
    base.emplace(e, AttrId{0}, capacity, cfg);
    doubled.emplace(e, AttrId{0}, capacity, hard);
  } catch (const Error& err) {
    report(false, "transformer equivalence", err.what());
    report(false, "gate saturation", err.what());
    return;
  }

  const int trials = 200;
  int agree = 0, unexplained = 0, saturated = 0;
  for (int i = 0; i < trials; ++i) {
    auto t = random_tree(1 + rng.below(10), 100, 4, rng);
    std::vector<Path> reachable;
    for (const auto& [p, _] : enumerate_nodes(t))
      if (p.size() < capacity) reachable.push_back(p);
    auto path = reachable[rng.below(reachable.size())];

    auto v = bt_encode(t, e);
    auto labels = base->run(v, path);
    auto decoded = decode(v, e);
    bool same = true;
    for (std::size_t k = 0; k <= path.size(); ++k) {
      Path prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k));
      auto expect = decoded ? node_at(*decoded, prefix) : std::nullopt;
      same = same && labels[k] == expect;
    }
    agree += same;
    unexplained += !same && decoded && *decoded == t;
    saturated += doubled->run(v, path) == labels;
  }
  report(agree >= 0.95 * trials && unexplained == 0, "transformer equivalence",
         fmt("%d/%d agree with decode (need >= 95%%), %d disagreements on exact round trips, "
             "max code overlap %.3f, %.1fs",
             agree, trials, unexplained, base->codes().max_overlap, clock.seconds()));
  report(saturated == trials, "gate saturation",
         fmt("%d/%d label sequences unchanged with C and sharpness doubled", saturated, trials));
}

void parsing() {
  Timer clock;
  const auto s = balanced_parens_schema();
  const auto e = make_embedding(s, 1000, 1007);
  const auto g = balanced_parens_grammar(s);
  const auto args = arg_attributes(s);
  const auto rules = compile_rules(g, e, *s.find_attribute("next"), args);
  Rng rng(derive_seed(1007, {7}));
  const int trials = 200;
  int ok = 0;
  for (int i = 0; i < trials; ++i) {
    auto input = dyck_tokens(random_dyck(2 * (1 + rng.below(6)), rng), s);
    const auto budget = default_max_steps(input.size());
    auto oracle = symbolic_parse(input, g, args, budget);
    try {
      auto got = decode(parse(input, rules, e, budget).vector, e);
      ok += oracle.size() == 1 && got && *got == oracle[0];
    } catch (const Error&) {
    }
  }
  report(ok >= 0.99 * trials, "parsing d=1000 len<=12",
         fmt("%d/%d decode to the oracle tree (need >= 99%%), %.1fs", ok, trials, clock.seconds()));
}

void isolation() {
  report(parse_engine_isolated(), "parser isolation",
         "parse engine compiled with the embedding header forbidden");
}

void separation() {
  Timer clock;
  int within = 0;
  double worst = 0, bound = 0;
  for (std::uint64_t run = 0; run < 20; ++run) {
    auto r = run_separation_probe(2000, 4, 100, 4, 500, derive_seed(1008, {run}));
    bound = r.doubled_bound;
    worst = std::max(worst, r.max_abs_ip);
    within += r.max_abs_ip <= r.doubled_bound;
  }
  report(within >= 19, "separation d=2000 n=500",
         fmt("%d/20 runs within %.3f (need >= 19), worst %.3f, %.1fs", within, bound, worst,
             clock.seconds()));
}

void determinism() {
  bool same = true;
  for (auto kind : {SweepKind::Lists, SweepKind::Trees, SweepKind::Parse}) {
    SweepSpec s;
    s.kind = kind;
    s.dims = {64, 256};
    s.sizes = {2, 6};
    s.trials = 10;
    s.seed = 1009;
    std::ostringstream a, b;
    write_csv(a, kind, run_sweep(s));
    write_csv(b, kind, run_sweep(s));
    same = same && a.str() == b.str();
  }
  report(same, "determinism", "repeated sweeps of every kind give byte-identical CSV");
}

}  // namespace

int main() {
  round_trip_and_cardinality();
  lists();
  failure_regime();
  linearity();
  push_identity();
  transformer();
  parsing();
  isolation();
  separation();
  determinism();
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
