// Command-line front end. Each subcommand parses flags, loads files, calls
// one library operation and writes the result.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "btembed/core.hpp"
#include "btembed/decode.hpp"
#include "btembed/embed.hpp"
#include "btembed/error.hpp"
#include "btembed/harness.hpp"
#include "btembed/parse.hpp"
#include "btembed/transformer.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kSchemaMismatch = 3,
  kDecodeAbsent = 4,
  kNoParse = 5,
  kBudgetExceeded = 6,
};

int exit_code(bt::ErrorKind kind) {
  switch (kind) {
    case bt::ErrorKind::SchemaMismatch: return kSchemaMismatch;
    case bt::ErrorKind::NoParse: return kNoParse;
    case bt::ErrorKind::BudgetExceeded:
    case bt::ErrorKind::StepBudgetExceeded: return kBudgetExceeded;
    default: return kFailure;
  }
}

/// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw bt::Error(bt::ErrorKind::Io, "cannot write " + path);
  out << text;
}

std::vector<std::size_t> parse_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw bt::Error(bt::ErrorKind::InvalidSpec, "bad list entry '" + item + "'");
    }
  }
  return out;
}

bt::AttrId attribute_named(const bt::Schema& s, const std::string& name) {
  auto a = s.find_attribute(name);
  if (!a) throw bt::Error(bt::ErrorKind::SchemaMismatch, "no attribute '" + name + "'");
  return *a;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BT embeddings: encode, decode, parse and query labelled trees"};
  app.require_subcommand(1);
  std::function<int()> action;

  // gen-schema
  std::size_t gen_tokens = 100, gen_attrs = 4;
  std::string out_path;
  auto* gen = app.add_subcommand("gen-schema", "Write a schema t0..tN-1 plus next, arg1..");
  gen->add_option("--tokens", gen_tokens, "content tokens")->required();
  gen->add_option("--attrs", gen_attrs, "attributes (next, arg1, ...)")->required();
  gen->add_option("-o,--output", out_path, "schema JSON")->required();
  gen->callback([&] {
    action = [&] {
      bt::save_schema(bt::generated_schema(gen_tokens, gen_attrs), out_path);
      return kOk;
    };
  });

  // embed
  std::string schema_path;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  auto* emb = app.add_subcommand("embed", "Build a random embedding for a schema");
  emb->add_option("--schema", schema_path)->required()->check(CLI::ExistingFile);
  emb->add_option("--dim", dim)->required();
  emb->add_option("--seed", seed)->required();
  emb->add_option("-o,--output", out_path)->required();
  emb->callback([&] {
    action = [&] {
      auto e = bt::make_embedding(bt::load_schema(schema_path), dim, seed);
      bt::save_embedding(e, out_path);
      return kOk;
    };
  });

  // encode
  std::string embedding_path, tree_path, list_text, next_name = "next";
  auto* enc = app.add_subcommand("encode", "Encode a tree JSON file or a token list");
  enc->add_option("--embedding", embedding_path)->required()->check(CLI::ExistingFile);
  auto* tree_opt = enc->add_option("--tree", tree_path)->check(CLI::ExistingFile);
  auto* list_opt = enc->add_option("--list", list_text, "whitespace-separated tokens");
  tree_opt->excludes(list_opt);
  enc->add_option("--next", next_name, "list attribute");
  enc->add_option("-o,--output", out_path)->required();
  enc->callback([&] {
    action = [&] {
      auto e = bt::load_embedding(embedding_path);
      bt::BTVector v;
      if (tree_opt->count()) {
        v = bt::bt_encode(bt::load_tree(tree_path, e.schema()), e);
      } else if (list_opt->count()) {
        auto tokens = bt::parse_token_string(list_text, e.schema());
        v = bt::encode_list(tokens, e, attribute_named(e.schema(), next_name));
      } else {
        throw CLI::ValidationError("encode", "one of --tree or --list is required");
      }
      bt::save_vector(v, out_path);
      return kOk;
    };
  });

  // decode
  std::string vec_path;
  bt::DecodeConfig dcfg;
  auto* dec = app.add_subcommand("decode", "Recover a tree from an encoding");
  dec->add_option("--embedding", embedding_path)->required()->check(CLI::ExistingFile);
  dec->add_option("--vec", vec_path)->required()->check(CLI::ExistingFile);
  dec->add_option("--threshold", dcfg.threshold);
  dec->add_option("--max-depth", dcfg.max_depth);
  dec->add_option("--max-nodes", dcfg.max_nodes);
  dec->add_option("-o,--output", out_path, "tree JSON (stdout if omitted)");
  dec->callback([&] {
    action = [&] {
      auto v = bt::load_vector(vec_path);
      auto e = bt::load_embedding(embedding_path);
      e.check(v);
      auto tree = bt::decode(v, e, dcfg);
      if (!tree) {
        std::cerr << "decode: no token clears the threshold at the root\n";
        return kDecodeAbsent;
      }
      emit(out_path, bt::tree_to_json(*tree, e.schema()).dump(2) + "\n");
      return kOk;
    };
  });

  // parse
  std::string rules_path, input_text, tree_out;
  std::size_t max_steps = 0;
  bool also_decode = false;
  auto* par = app.add_subcommand("parse", "Parse a token string in embedding space");
  par->add_option("--embedding", embedding_path)->required()->check(CLI::ExistingFile);
  par->add_option("--rules", rules_path)->required()->check(CLI::ExistingFile);
  par->add_option("--input", input_text, "whitespace-separated tokens")->required();
  par->add_option("--max-steps", max_steps, "default 4 * len^2");
  par->add_option("-o,--output", out_path, "parse tree encoding")->required();
  par->add_flag("--decode", also_decode, "decode the result and print tree JSON");
  par->add_option("--tree-out", tree_out, "where --decode writes (stdout if omitted)");
  par->callback([&] {
    action = [&] {
      auto e = bt::load_embedding(embedding_path);
      const auto& s = e.schema();
      auto grammar = bt::load_grammar(rules_path, s);
      auto input = bt::parse_token_string(input_text, s);
      auto rules = bt::compile_rules(grammar, e, attribute_named(s, next_name),
                                     bt::arg_attributes(s));
      auto result = bt::parse(input, rules, e,
                              max_steps ? max_steps : bt::default_max_steps(input.size()));
      bt::save_vector(result.vector, out_path);
      if (also_decode) {
        auto tree = bt::decode(result.vector, e);
        if (!tree) {
          std::cerr << "parse: result does not decode\n";
          return kDecodeAbsent;
        }
        emit(tree_out, bt::tree_to_json(*tree, s).dump(2) + "\n");
      }
      return kOk;
    };
  });

  // transformer-query
  std::string path_text, dump_prefix;
  bt::XfConfig xcfg;
  auto* xq = app.add_subcommand("transformer-query",
                                "Read the labels along a path with the closed-form transformer");
  xq->add_option("--embedding", embedding_path)->required()->check(CLI::ExistingFile);
  xq->add_option("--vec", vec_path)->required()->check(CLI::ExistingFile);
  xq->add_option("--path", path_text, "comma-separated attributes")->required();
  xq->add_option("--k", xcfg.k, "position code dimension");
  xq->add_option("--sharpness", xcfg.attn_sharpness);
  xq->add_option("--gate-c", xcfg.gate_constant);
  xq->add_option("--seed", xcfg.seed, "position code seed");
  xq->add_option("--next", next_name, "path list attribute");
  xq->add_option("--dump-weights", dump_prefix, "write PREFIX.bin and PREFIX.json");
  xq->callback([&] {
    action = [&] {
      auto v = bt::load_vector(vec_path);
      auto e = bt::load_embedding(embedding_path);
      e.check(v);
      auto path = bt::parse_path(path_text, e.schema());
      bt::PathDecoder model(e, attribute_named(e.schema(), next_name),
                            path.size() + 1, xcfg);
      if (!dump_prefix.empty()) model.export_weights(dump_prefix);
      for (const auto& label : model.run(v, path)) {
        std::cout << (label ? e.schema().name(*label) : std::string("<absent>")) << '\n';
      }
      return kOk;
    };
  });

  // experiment
  std::string kind_name, dims_text, sizes_text;
  bt::SweepSpec spec;
  auto* exp = app.add_subcommand("experiment", "Seeded decode/parse success sweeps as CSV");
  exp->add_option("kind", kind_name, "lists | trees | parse")
      ->required()
      ->check(CLI::IsMember({"lists", "trees", "parse"}));
  exp->add_option("--dims", dims_text)->required();
  exp->add_option("--sizes", sizes_text)->required();
  exp->add_option("--trials", spec.trials);
  exp->add_option("--seed", spec.seed);
  exp->add_option("--tokens", spec.tokens, "content tokens (lists, trees)");
  exp->add_option("--attrs", spec.attrs, "attributes (trees)");
  exp->add_flag("--timing", spec.timing, "record wall time per cell");
  exp->add_option("-o,--output", out_path, "CSV (stdout if omitted)");
  exp->callback([&] {
    action = [&] {
      spec.kind = *bt::sweep_kind_from_string(kind_name);
      spec.dims = parse_list(dims_text);
      spec.sizes = parse_list(sizes_text);
      std::ostringstream csv;
      bt::write_csv(csv, spec.kind, bt::run_sweep(spec));
      emit(out_path, csv.str());
      return kOk;
    };
  });

  // separation
  std::size_t sep_depth = 4, sep_samples = 500, sep_tokens = 100, sep_attrs = 4;
  std::uint64_t sep_seed = 42;
  auto* sep = app.add_subcommand("separation", "Pairwise inner products over products of attribute matrices");
  sep->add_option("--dim", dim)->required();
  sep->add_option("--depth", sep_depth);
  sep->add_option("--samples", sep_samples);
  sep->add_option("--seed", sep_seed);
  sep->add_option("--tokens", sep_tokens);
  sep->add_option("--attrs", sep_attrs);
  sep->add_option("-o,--output", out_path, "CSV (stdout if omitted)");
  sep->callback([&] {
    action = [&] {
      auto report = bt::run_separation_probe(dim, sep_depth, sep_tokens,
                                             sep_attrs, sep_samples, sep_seed);
      std::ostringstream csv;
      bt::write_separation_csv(csv, report);
      emit(out_path, csv.str());
      return kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kUsage;
  } catch (const bt::Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
