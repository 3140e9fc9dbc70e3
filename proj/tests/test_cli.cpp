#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rmat_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int rmat(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + RMAT_CLI + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string data(const std::string& name) { return "\"" + std::string(RMAT_TEST_DATA) + "/" + name + "\""; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("featurize CO2 writes one dump including the dummy node") {
    const auto d = fresh_dir("co2");
    CHECK(rmat("featurize " + data("co2.sdf") + " --out \"" + (d / "out").string() + "\"", d) == 0);
    const auto dump = slurp(d / "out" / "mol_0.csv");
    CHECK(dump.rfind("atoms=4,atom_dim=36,relation_dim=45\n", 0) == 0);
    CHECK(fs::exists(d / "out" / "manifest.json"));
  }

  TEST_CASE("empty input is a warning, not an error") {
    const auto d = fresh_dir("empty");
    std::ofstream(d / "empty.sdf").close();
    CHECK(rmat("featurize \"" + (d / "empty.sdf").string() + "\" --out \"" + (d / "out").string() + "\"", d) == 0);
    CHECK_FALSE(fs::exists(d / "out" / "mol_0.csv"));
  }

  TEST_CASE("a bad record among good ones gives partial output and a log") {
    const auto d = fresh_dir("mixed");
    const std::string good = slurp(std::string(RMAT_TEST_DATA) + "/ethanol.sdf");
    std::string bad = good;
    bad.replace(bad.find("  1  2  1  0"), 12, "  1  9  1  0");
    std::ofstream(d / "mixed.sdf") << good << bad << good;
    CHECK(rmat("featurize \"" + (d / "mixed.sdf").string() + "\" --out \"" + (d / "out").string() + "\"", d) == 0);
    CHECK(fs::exists(d / "out" / "mol_1.csv"));
    CHECK_FALSE(fs::exists(d / "out" / "mol_2.csv"));
    CHECK(slurp(d / "out" / "errors.log").find("record 1") != std::string::npos);
  }

  TEST_CASE("exit codes") {
    const auto d = fresh_dir("codes");
    std::ofstream(d / "bad.cfg") << "bogus = 1\n";
    std::ofstream(d / "bad.smi") << "Q1\n";
    std::ofstream(d / "data.csv") << "smiles,y\nCC,1\nCCC,2\n";
    CHECK(rmat("finetune \"" + (d / "data.csv").string() + "\" --config \"" + (d / "bad.cfg").string() + "\"", d) == 1);
    CHECK(rmat("featurize \"" + (d / "bad.smi").string() + "\" --format smiles --out \"" + (d / "o").string() + "\"", d) == 2);
    CHECK(rmat("", d) != 0);
  }

  TEST_CASE("pretrain, then fine-tune and evaluate from its checkpoint") {
    const auto d = fresh_dir("pipeline");
    {
      std::ofstream smi(d / "corpus.smi");
      for (const char* s : {"CCO", "CC(=O)O", "c1ccccc1", "CCN", "OCC(O)CO", "CC#N", "COC", "C1CCCCC1", "CC(C)O", "NCC(=O)O"})
        smi << s << "\n";
      std::ofstream csv(d / "data.csv");
      csv << "smiles,y\nCCO,1\nCC(=O)O,2\nc1ccccc1,3\nCCN,1.5\nOCC(O)CO,2.5\nCC#N,1\nCOC,0.5\nC1CCCCC1,3.5\nCC(C)O,2\nNCC(=O)O,1.8\n";
      std::ofstream cfg(d / "run.cfg");
      cfg << "n_layers = 1\nn_heads = 2\nd_model = 16\nepochs = 2\nbatch_size = 4\nlr_grid = 1e-3\npretrain_epochs = 2\n"
             "pretrain_batch_size = 4\nstages = contextual, descriptors\n";
    }
    const std::string cfg = " --config \"" + (d / "run.cfg").string() + "\"";
    REQUIRE(rmat("pretrain \"" + (d / "corpus.smi").string() + "\" --format smiles" + cfg + " --out \"" +
                     (d / "pre").string() + "\"",
                 d) == 0);
    fs::path last;
    for (const auto& e : fs::directory_iterator(d / "pre"))
      if (e.path().extension() == ".ckpt" && e.path().filename().string() > last.filename().string()) last = e.path();
    REQUIRE_FALSE(last.empty());
    CHECK(fs::exists(d / "pre" / "vocab.txt"));
    REQUIRE(rmat("finetune \"" + (d / "data.csv").string() + "\"" + cfg + " --checkpoint \"" + last.string() +
                     "\" --out \"" + (d / "ft").string() + "\"",
                 d) == 0);
    CHECK(fs::exists(d / "ft" / "result.json"));
    CHECK(rmat("evaluate \"" + (d / "data.csv").string() + "\"" + cfg + " --checkpoint \"" +
                   (d / "ft" / "model.ckpt").string() + "\" --out \"" + (d / "ev").string() + "\"",
               d) == 0);
  }

  TEST_CASE("gridsearch expands a config matrix") {
    const auto d = fresh_dir("grid");
    std::ofstream(d / "data.csv") << "smiles,y\nCCO,1\nCC(=O)O,2\nc1ccccc1,3\nCCN,1.5\nOCC(O)CO,2.5\nCC#N,1\nCOC,0.5\n"
                                     "C1CCCCC1,3.5\nCC(C)O,2\nNCC(=O)O,1.8\n";
    std::ofstream(d / "m.cfg") << "n_layers = 1\nn_heads = 2\nepochs = 1\nbatch_size = 4\nlr_grid = 1e-3\nd_model = 8 | 16\n";
    CHECK(rmat("gridsearch \"" + (d / "data.csv").string() + "\" --config \"" + (d / "m.cfg").string() + "\" --out \"" +
                   (d / "out").string() + "\"",
               d) == 0);
    const auto summary = slurp(d / "out" / "gridsearch.csv");
    std::size_t lines = 0;
    for (char c : summary) lines += c == '\n';
    CHECK(lines == 3);
    CHECK(fs::exists(d / "out" / "run_1" / "result.json"));
  }
}
