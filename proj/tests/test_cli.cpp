#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "btembed_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const char* name) { return (workdir() / name).string(); }

int cli(const std::string& args) {
  std::string cmd = std::string(BTEMBED_CLI) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("encode and decode a tree file") {
  REQUIRE(cli("gen-schema --tokens 100 --attrs 4 -o " + at("s.json")) == 0);
  REQUIRE(cli("embed --schema " + at("s.json") + " --dim 2000 --seed 7 -o " + at("e.bte")) == 0);
  std::ofstream(at("t.json")) << R"({"label":"t3","children":{
      "next":{"label":"t4","children":{}},
      "arg2":{"label":"t5","children":{"next":{"label":"t9","children":{}}}}}})";
  REQUIRE(cli("encode --embedding " + at("e.bte") + " --tree " + at("t.json") + " -o " + at("t.btv")) == 0);
  REQUIRE(cli("decode --embedding " + at("e.bte") + " --vec " + at("t.btv") + " -o " + at("back.json")) == 0);
  CHECK(nlohmann::json::parse(slurp(at("back.json"))) == nlohmann::json::parse(slurp(at("t.json"))));

  REQUIRE(cli("transformer-query --embedding " + at("e.bte") + " --vec " + at("t.btv") +
              " --path arg2,next --k 256 > " + at("labels.txt")) == 0);
  CHECK(slurp(at("labels.txt")) == "t3\nt5\nt9\n");
}

TEST_CASE("zero vector decodes to nothing") {
  REQUIRE(cli("gen-schema --tokens 5 --attrs 1 -o " + at("z.json")) == 0);
  REQUIRE(cli("embed --schema " + at("z.json") + " --dim 64 --seed 1 -o " + at("z.bte")) == 0);
  REQUIRE(cli("encode --embedding " + at("z.bte") + " --list '' -o " + at("zero.btv")) == 0);
  CHECK(cli("decode --embedding " + at("z.bte") + " --vec " + at("zero.btv")) == 4);
}

TEST_CASE("vectors from another embedding are refused") {
  REQUIRE(cli("gen-schema --tokens 5 --attrs 1 -o " + at("m.json")) == 0);
  REQUIRE(cli("embed --schema " + at("m.json") + " --dim 64 --seed 1 -o " + at("m1.bte")) == 0);
  REQUIRE(cli("embed --schema " + at("m.json") + " --dim 64 --seed 2 -o " + at("m2.bte")) == 0);
  REQUIRE(cli("encode --embedding " + at("m1.bte") + " --list 't1 t2' -o " + at("m.btv")) == 0);
  CHECK(cli("decode --embedding " + at("m2.bte") + " --vec " + at("m.btv")) == 3);
}

TEST_CASE("parse with decode") {
  std::ofstream(at("p.json")) << R"({"tokens":["L","R","E","next","arg1","arg2","arg3"],
      "attributes":["next","arg1","arg2","arg3"]})";
  std::ofstream(at("g.json")) << R"([
      {"pattern":["L","R"],"replacement":"E"},
      {"pattern":["L","E","R"],"replacement":"E"},
      {"pattern":["E","E"],"replacement":"E"}])";
  REQUIRE(cli("embed --schema " + at("p.json") + " --dim 1000 --seed 3 -o " + at("p.bte")) == 0);
  REQUIRE(cli("parse --embedding " + at("p.bte") + " --rules " + at("g.json") +
              " --input 'L R' -o " + at("p.btv") + " --decode --tree-out " + at("p.tree.json")) == 0);
  auto tree = nlohmann::json::parse(slurp(at("p.tree.json")));
  CHECK(tree["label"] == "E");
  CHECK(tree["children"]["arg1"]["label"] == "L");
  CHECK(tree["children"]["arg2"]["label"] == "R");
  CHECK(tree["children"].size() == 2);

  CHECK(cli("parse --embedding " + at("p.bte") + " --rules " + at("g.json") +
            " --input 'R L' -o " + at("bad.btv")) == 5);
}

TEST_CASE("experiment output is byte-stable") {
  auto run = [](const char* out) {
    return cli("experiment trees --dims 100,200 --sizes 2,5 --trials 5 --seed 9 -o " + at(out));
  };
  REQUIRE(run("a.csv") == 0);
  REQUIRE(run("b.csv") == 0);
  CHECK(slurp(at("a.csv")) == slurp(at("b.csv")));
  CHECK(cli("experiment lists --dims x --sizes 2") == 1);
  CHECK(cli("experiment bogus --dims 10 --sizes 2") == 2);
  CHECK(cli("decode") == 2);
}
