#include "btembed/decode.hpp"

#include <limits>

#include "btembed/error.hpp"

namespace bt {

namespace {

struct Probe {
  Eigen::Index best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  double runner_up = -std::numeric_limits<double>::infinity();
};

Probe probe(const Eigen::Ref<const Eigen::VectorXd>& v,
            const Eigen::MatrixXd& tokens) {
  const Eigen::VectorXd x = tokens * v;
  Probe p;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > p.best_value) {
      p.runner_up = p.best_value;
      p.best_value = x[i];
      p.best = i;
    } else if (x[i] > p.runner_up) {
      p.runner_up = x[i];
    }
  }
  return p;
}

class Decoder {
 public:
  Decoder(const Embedding& e, const DecodeConfig& cfg, DecodeReport& report)
      : e_(e), cfg_(cfg), report_(report) {}

  std::optional<Tree> run(const Eigen::VectorXd& v, Path& path) {
    if (path.size() > cfg_.max_depth) {
      throw Error(ErrorKind::BudgetExceeded,
                  "decode exceeded max depth " + std::to_string(cfg_.max_depth));
    }
    ++report_.candidates;
    report_.probes += static_cast<std::size_t>(e_.token_matrix().rows());
    const Probe p = probe(v, e_.token_matrix());
    if (p.best < 0 || !(p.best_value > cfg_.threshold)) return std::nullopt;

    if (++accepted_ > cfg_.max_nodes) {
      throw Error(ErrorKind::BudgetExceeded,
                  "decode exceeded max nodes " + std::to_string(cfg_.max_nodes));
    }
    const auto label = static_cast<TokenId>(p.best);
    report_.margins.push_back({path, label, p.best_value, p.runner_up});

    std::vector<Tree::Child> kids;
    const auto nattr = e_.schema().attribute_count();
    Eigen::VectorXd moved(v.size());
    for (std::size_t j = 0; j < nattr; ++j) {
      const auto a = static_cast<AttrId>(j);
      moved.noalias() = e_.attr(a).transpose() * v;
      path.push_back(a);
      auto sub = run(moved, path);
      path.pop_back();
      if (sub) kids.emplace_back(a, std::move(*sub));
    }
    return Tree(label, std::move(kids));
  }

 private:
  const Embedding& e_;
  const DecodeConfig& cfg_;
  DecodeReport& report_;
  std::size_t accepted_ = 0;
};

}  // namespace

DecodeReport decode_report(const BTVector& v, const Embedding& e,
                           const DecodeConfig& cfg) {
  e.check(v);
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0) || cfg.max_depth == 0 ||
      cfg.max_nodes == 0) {
    throw Error(ErrorKind::InvalidSpec,
                "decode threshold must lie in (0, 1) and caps be positive");
  }
  DecodeReport report;
  Path path;
  report.tree = Decoder(e, cfg, report).run(v.data, path);
  return report;
}

std::optional<Tree> decode(const BTVector& v, const Embedding& e,
                           const DecodeConfig& cfg) {
  return decode_report(v, e, cfg).tree;
}

std::optional<TokenId> decode_token(const Eigen::Ref<const Eigen::VectorXd>& v,
                                    const Eigen::MatrixXd& token_matrix,
                                    double threshold) {
  const Probe p = probe(v, token_matrix);
  if (p.best < 0 || !(p.best_value > threshold)) return std::nullopt;
  return static_cast<TokenId>(p.best);
}

std::optional<TokenId> decode_token(const BTVector& v, const Embedding& e,
                                    double threshold) {
  e.check(v);
  return decode_token(v.data, e.token_matrix(), threshold);
}

}  // namespace bt
