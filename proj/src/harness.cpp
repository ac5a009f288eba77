#include "btembed/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <map>
#include <set>

#include "btembed/decode.hpp"
#include "btembed/error.hpp"

namespace bt {

std::string_view to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::Lists: return "lists";
    case SweepKind::Trees: return "trees";
    case SweepKind::Parse: return "parse";
  }
  return "unknown";
}

std::optional<SweepKind> sweep_kind_from_string(std::string_view name) {
  for (auto k : {SweepKind::Lists, SweepKind::Trees, SweepKind::Parse}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::uint64_t trial_seed(const SweepSpec& spec, std::size_t d, std::size_t l,
                         std::size_t trial) {
  return derive_seed(spec.seed,
                     {static_cast<std::uint64_t>(spec.kind), d, l, trial});
}

namespace {

std::uint64_t embedding_seed(const SweepSpec& spec, std::size_t d) {
  return derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.kind), d});
}

void validate(const SweepSpec& spec) {
  if (spec.dims.empty() || spec.sizes.empty()) {
    throw Error(ErrorKind::InvalidSpec, "sweep needs dims and sizes");
  }
  if (spec.trials == 0) {
    throw Error(ErrorKind::InvalidSpec, "sweep needs at least one trial");
  }
  for (auto d : spec.dims) {
    if (d < 2) throw Error(ErrorKind::InvalidSpec, "dims must be >= 2");
  }
  for (auto l : spec.sizes) {
    if (l == 0) throw Error(ErrorKind::InvalidSpec, "sizes must be >= 1");
    if (spec.kind == SweepKind::Parse && l % 2 != 0) {
      throw Error(ErrorKind::InvalidSpec,
                  "balanced strings have even length, got " + std::to_string(l));
    }
  }
  if (spec.kind != SweepKind::Parse && spec.tokens == 0) {
    throw Error(ErrorKind::InvalidSpec, "schema needs tokens");
  }
  if (spec.kind == SweepKind::Trees && spec.attrs == 0) {
    throw Error(ErrorKind::InvalidSpec, "tree schema needs attributes");
  }
}

/// Runs `trial(rng, d, l, embedding) -> bool` over every cell, building one
/// embedding per dimension.
template <typename Trial>
std::vector<CellResult> sweep(const SweepSpec& spec, const Schema& schema,
                              Trial&& trial) {
  validate(spec);
  std::vector<CellResult> cells;
  for (auto d : spec.dims) {
    const Embedding e = make_embedding(schema, d, embedding_seed(spec, d));
    for (auto l : spec.sizes) {
      const auto start = std::chrono::steady_clock::now();
      CellResult cell{d, l, spec.trials, 0, 0.0, 0.0};
      for (std::size_t t = 0; t < spec.trials; ++t) {
        Rng rng(trial_seed(spec, d, l, t));
        if (trial(rng, l, e)) ++cell.successes;
      }
      cell.success_rate =
          static_cast<double>(cell.successes) / static_cast<double>(cell.trials);
      if (spec.timing) {
        cell.wall_time_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

bool decodes_to(const BTVector& v, const Embedding& e, const Tree& expect) {
  try {
    auto got = decode(v, e);
    return got && *got == expect;
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::BudgetExceeded) return false;
    throw;
  }
}

}  // namespace

std::vector<CellResult> run_list_sweep(const SweepSpec& spec) {
  if (spec.kind != SweepKind::Lists) {
    throw Error(ErrorKind::InvalidSpec, "list sweep given another kind");
  }
  const Schema schema = generated_schema(spec.tokens, 1);
  const AttrId next{0};
  return sweep(spec, schema, [&](Rng& rng, std::size_t l, const Embedding& e) {
    std::vector<TokenId> list(l);
    for (auto& t : list) t = static_cast<TokenId>(rng.below(spec.tokens));
    Tree chain(list.back());
    for (std::size_t i = l - 1; i-- > 0;) {
      chain = Tree(list[i], {{next, std::move(chain)}});
    }
    return decodes_to(encode_list(list, e, next), e, chain);
  });
}

std::vector<CellResult> run_tree_sweep(const SweepSpec& spec) {
  if (spec.kind != SweepKind::Trees) {
    throw Error(ErrorKind::InvalidSpec, "tree sweep given another kind");
  }
  const Schema schema = generated_schema(spec.tokens, spec.attrs);
  return sweep(spec, schema, [&](Rng& rng, std::size_t l, const Embedding& e) {
    Tree t = random_tree(l, spec.tokens, spec.attrs, rng);
    return decodes_to(bt_encode(t, e), e, t);
  });
}

std::vector<CellResult> run_parse_sweep(const SweepSpec& spec) {
  if (spec.kind != SweepKind::Parse) {
    throw Error(ErrorKind::InvalidSpec, "parse sweep given another kind");
  }
  const Schema schema = balanced_parens_schema();
  const Grammar grammar = balanced_parens_grammar(schema);
  const AttrId next = *schema.find_attribute("next");
  const auto args = arg_attributes(schema);
  std::optional<RuleSet> rules;
  return sweep(spec, schema, [&](Rng& rng, std::size_t l, const Embedding& e) {
    if (!rules || rules->fingerprint != e.fingerprint()) {
      rules = compile_rules(grammar, e, next, args);
    }
    const auto input = dyck_tokens(random_dyck(l, rng), schema);
    const auto max_steps = default_max_steps(input.size());
    const auto expect = symbolic_parse(input, grammar, args, max_steps);
    if (expect.size() != 1) return false;
    try {
      const auto result = parse(input, *rules, e, max_steps);
      return decodes_to(result.vector, e, expect.front());
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::NoParse ||
          err.kind() == ErrorKind::StepBudgetExceeded) {
        return false;
      }
      throw;
    }
  });
}

std::vector<CellResult> run_sweep(const SweepSpec& spec) {
  switch (spec.kind) {
    case SweepKind::Lists: return run_list_sweep(spec);
    case SweepKind::Trees: return run_tree_sweep(spec);
    case SweepKind::Parse: return run_parse_sweep(spec);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown sweep kind");
}

void write_csv(std::ostream& out, SweepKind kind,
               const std::vector<CellResult>& cells) {
  out << "kind,d,l,trials,successes,success_rate,wall_time_ms\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%.6f,%.3f\n",
                  std::string(to_string(kind)).c_str(), c.d, c.l, c.trials,
                  c.successes, c.success_rate, c.wall_time_ms);
    out << buf;
  }
}

std::map<std::size_t, std::optional<std::size_t>> fit_boundaries(
    const std::vector<CellResult>& cells, double rate) {
  std::map<std::size_t, std::vector<const CellResult*>> by_size;
  for (const auto& c : cells) by_size[c.l].push_back(&c);
  std::map<std::size_t, std::optional<std::size_t>> out;
  for (auto& [l, row] : by_size) {
    std::sort(row.begin(), row.end(),
              [](auto* a, auto* b) { return a->d < b->d; });
    std::optional<std::size_t> boundary;
    for (auto it = row.rbegin(); it != row.rend(); ++it) {
      if ((*it)->success_rate < rate) break;
      boundary = (*it)->d;
    }
    out[l] = boundary;
  }
  return out;
}

std::optional<std::size_t> estimate_boundary(const SweepSpec& base,
                                             std::size_t l, std::size_t d_lo,
                                             std::size_t d_hi,
                                             std::size_t step, double rate) {
  if (step == 0 || d_lo < 2 || d_hi < d_lo) {
    throw Error(ErrorKind::InvalidSpec, "bad boundary search range");
  }
  auto passes = [&](std::size_t d) {
    SweepSpec spec = base;
    spec.dims = {d};
    spec.sizes = {l};
    return run_sweep(spec).front().success_rate >= rate;
  };
  std::size_t lo = 0, hi = (d_hi - d_lo) / step;
  if (!passes(d_lo + hi * step)) return std::nullopt;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(d_lo + mid * step)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return d_lo + lo * step;
}

// ---------------------------------------------------------------------------
// Samplers

Tree random_tree(std::size_t nodes, std::size_t label_tokens,
                 std::size_t attrs, Rng& rng) {
  if (nodes == 0 || label_tokens == 0 || (nodes > 1 && attrs == 0)) {
    throw Error(ErrorKind::InvalidSpec, "cannot sample that tree");
  }
  struct Node {
    TokenId label;
    std::vector<std::optional<std::size_t>> child;
  };
  std::vector<Node> pool;
  auto make = [&] {
    pool.push_back({static_cast<TokenId>(rng.below(label_tokens)),
                    std::vector<std::optional<std::size_t>>(attrs)});
  };
  make();
  while (pool.size() < nodes) {
    std::vector<std::pair<std::size_t, std::size_t>> open;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      for (std::size_t a = 0; a < attrs; ++a) {
        if (!pool[i].child[a]) open.emplace_back(i, a);
      }
    }
    const auto [parent, a] = open[rng.below(open.size())];
    make();
    pool[parent].child[a] = pool.size() - 1;
  }
  auto build = [&](auto&& self, std::size_t i) -> Tree {
    std::vector<Tree::Child> kids;
    for (std::size_t a = 0; a < attrs; ++a) {
      if (auto c = pool[i].child[a]) {
        kids.emplace_back(static_cast<AttrId>(a), self(self, *c));
      }
    }
    return Tree(pool[i].label, std::move(kids));
  };
  return build(build, 0);
}

std::vector<bool> random_dyck(std::size_t length, Rng& rng) {
  if (length % 2 != 0) {
    throw Error(ErrorKind::InvalidSpec, "Dyck words have even length");
  }
  const std::size_t n = length / 2;
  // n opens and n + 1 closes, shuffled; exactly one rotation keeps every
  // proper prefix non-negative, and dropping its final close gives the word.
  std::vector<bool> seq(2 * n + 1, false);
  std::fill(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(n), true);
  for (std::size_t i = seq.size(); i-- > 1;) {
    const auto j = rng.below(i + 1);
    const bool tmp = seq[i];
    seq[i] = seq[j];
    seq[j] = tmp;
  }
  long sum = 0, best = 1;
  std::size_t start = 0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    sum += seq[k] ? 1 : -1;
    if (sum < best) {
      best = sum;
      start = k + 1;
    }
  }
  std::vector<bool> word;
  word.reserve(length);
  for (std::size_t k = 0; k < length; ++k) {
    word.push_back(seq[(start + k) % seq.size()]);
  }
  return word;
}

Schema balanced_parens_schema() {
  return validate_schema({{"L", "R", "E", "next", "arg1", "arg2", "arg3"},
                          {"next", "arg1", "arg2", "arg3"}});
}

Grammar balanced_parens_grammar(const Schema& s) {
  const TokenId L = *s.find_token("L"), R = *s.find_token("R"),
                E = *s.find_token("E");
  return {{{L, R}, E}, {{L, E, R}, E}, {{E, E}, E}};
}

std::vector<TokenId> dyck_tokens(const std::vector<bool>& word,
                                 const Schema& s) {
  const TokenId L = *s.find_token("L"), R = *s.find_token("R");
  std::vector<TokenId> out;
  for (bool open : word) out.push_back(open ? L : R);
  return out;
}

std::vector<Tree> symbolic_parse(std::span<const TokenId> inputs,
                                 const Grammar& grammar,
                                 std::span<const AttrId> arg_attrs,
                                 std::size_t max_steps) {
  std::vector<Tree> slots;
  for (TokenId t : inputs) slots.emplace_back(t);
  std::size_t steps = 0;
  for (;;) {
    bool applied = false;
    for (const auto& rule : grammar) {
      const std::size_t m = rule.pattern.size();
      if (m > arg_attrs.size()) {
        throw Error(ErrorKind::ArityExceeded, "pattern longer than arg list");
      }
      for (std::size_t j = 0; j + m <= slots.size(); ++j) {
        bool match = true;
        for (std::size_t k = 0; k < m && match; ++k) {
          match = slots[j + k].label() == rule.pattern[k];
        }
        if (!match) continue;
        if (steps >= max_steps) {
          throw Error(ErrorKind::StepBudgetExceeded, "symbolic parse budget");
        }
        std::vector<Tree::Child> kids;
        for (std::size_t k = 0; k < m; ++k) {
          kids.emplace_back(arg_attrs[k], std::move(slots[j + k]));
        }
        const auto first = slots.begin() + static_cast<std::ptrdiff_t>(j);
        slots.erase(first + 1, first + static_cast<std::ptrdiff_t>(m));
        slots[j] = Tree(rule.replacement, std::move(kids));
        ++steps;
        applied = true;
        break;
      }
      if (applied) break;
    }
    if (!applied) return slots;
  }
}

// ---------------------------------------------------------------------------
// Separation probe

SeparationReport run_separation_probe(std::size_t d, std::size_t depth,
                                      std::size_t tokens, std::size_t attrs,
                                      std::size_t samples,
                                      std::uint64_t seed) {
  if (samples < 2 || tokens == 0 || d < 2 || (depth > 0 && attrs == 0)) {
    throw Error(ErrorKind::InvalidSpec, "separation probe parameters");
  }
  // Distinct (token, word) pairs available.
  double available = 0.0, words = 1.0;
  for (std::size_t len = 0; len <= depth; ++len) {
    available += words;
    words *= static_cast<double>(attrs);
  }
  available *= static_cast<double>(tokens);
  if (static_cast<double>(samples) > available) {
    throw Error(ErrorKind::InvalidSpec,
                "more samples requested than distinct elements exist");
  }

  // Same streams make_embedding would use under derive_seed(seed, {3}), but
  // only the pieces a sample touches get built; a depth-0 probe needs no
  // matrices at all.
  const std::uint64_t base = derive_seed(seed, {3});
  std::map<std::size_t, Eigen::VectorXd> token_cache;
  std::map<std::size_t, Eigen::MatrixXd> attr_cache;
  auto token = [&](std::size_t i) -> const Eigen::VectorXd& {
    auto it = token_cache.find(i);
    if (it == token_cache.end()) {
      Rng r(derive_seed(base, {0, i}));
      it = token_cache.emplace(i, random_unit_vector(d, r)).first;
    }
    return it->second;
  };
  auto attr = [&](std::size_t j) -> const Eigen::MatrixXd& {
    auto it = attr_cache.find(j);
    if (it == attr_cache.end()) {
      Rng r(derive_seed(base, {1, j}));
      it = attr_cache.emplace(j, haar_orthogonal(d, r)).first;
    }
    return it->second;
  };
  Rng rng(derive_seed(seed, {4}));

  std::set<std::vector<std::size_t>> seen;
  Eigen::MatrixXd points(static_cast<Eigen::Index>(d),
                         static_cast<Eigen::Index>(samples));
  std::size_t filled = 0;
  while (filled < samples) {
    // key = (token, word...)
    std::vector<std::size_t> key{rng.below(tokens)};
    const auto len = depth == 0 ? 0 : rng.below(depth + 1);
    for (std::size_t i = 0; i < len; ++i) key.push_back(rng.below(attrs));
    if (!seen.insert(key).second) continue;
    Eigen::VectorXd v = token(key[0]);
    for (std::size_t i = key.size(); i-- > 1;) v = attr(key[i]) * v;
    points.col(static_cast<Eigen::Index>(filled++)) = v;
  }

  const Eigen::MatrixXd gram = points.transpose() * points;
  SeparationReport r;
  r.d = d;
  r.depth = depth;
  r.samples = samples;
  const double logn = std::log(static_cast<double>(samples));
  r.jl_bound = 4.0 * std::sqrt(logn / static_cast<double>(d));
  r.doubled_bound = std::sqrt(32.0 * logn / static_cast<double>(d));
  std::vector<double> values;
  values.reserve(samples * (samples - 1) / 2);
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
      const double x = std::abs(gram(i, j));
      values.push_back(x);
      if (x > r.jl_bound) ++r.violations;
    }
  }
  r.pairs = values.size();
  std::sort(values.begin(), values.end());
  r.max_abs_ip = values.back();
  double total = 0.0;
  for (double x : values) total += x;
  r.mean_abs_ip = total / static_cast<double>(values.size());
  auto quantile = [&](double q) {
    return values[static_cast<std::size_t>(q * static_cast<double>(values.size() - 1))];
  };
  r.p50 = quantile(0.5);
  r.p90 = quantile(0.9);
  r.p99 = quantile(0.99);
  return r;
}

void write_separation_csv(std::ostream& out, const SeparationReport& r) {
  out << "d,depth,samples,max_abs_ip,jl_bound,violations\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.9f,%.9f,%zu\n", r.d, r.depth,
                r.samples, r.max_abs_ip, r.jl_bound, r.violations);
  out << buf;
}

}  // namespace bt
