#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rmat/error.hpp"
#include "rmat/molio.hpp"

namespace rmat::molio {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  for (auto& cell : cells) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw DataError("not a number: '" + s + "'");
  return v;
}

}  // namespace

Dataset parse_dataset_csv(std::string_view text, const std::string& base_dir) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset CSV is empty");
  const auto header = split_csv_line(line);

  int mol_col = -1;
  bool from_sdf = false;
  std::vector<std::size_t> label_cols, extra_cols;
  Dataset ds;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "smiles" || h == "sdf_path") {
      if (mol_col >= 0) throw DataError("dataset CSV has more than one molecule column");
      mol_col = static_cast<int>(c);
      from_sdf = h == "sdf_path";
    } else if (h.rfind("extra_", 0) == 0) {
      extra_cols.push_back(c);
      ds.extra_names.push_back(h);
    } else {
      label_cols.push_back(c);
      ds.label_names.push_back(h);
    }
  }
  if (mol_col < 0) throw DataError("dataset CSV needs a 'smiles' or 'sdf_path' column");

  std::size_t lineno = 1;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t this_record = record++;
    try {
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size())
        throw DataError("expected " + std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
      DatasetRow row;
      const std::string& mol_text = cells[mol_col];
      if (from_sdf) {
        const std::filesystem::path p = std::filesystem::path(base_dir) / mol_text;
        std::ifstream f(p);
        if (!f) throw DataError("cannot open " + p.string());
        auto res = parse_sdf(f);
        if (!res.errors.empty()) throw DataError(res.errors.front().message);
        if (res.molecules.empty()) throw DataError("no molecule in " + p.string());
        row.molecule = std::move(res.molecules.front());
      } else {
        row.molecule = parse_smiles(mol_text);
      }
      for (std::size_t c : label_cols) {
        if (cells[c].empty()) row.labels.emplace_back(std::nullopt);
        else row.labels.emplace_back(parse_number(cells[c]));
      }
      for (std::size_t c : extra_cols) {
        if (cells[c].empty()) throw DataError("missing value in column " + header[c]);
        row.extra.push_back(parse_number(cells[c]));
      }
      ds.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      ds.errors.push_back({this_record, lineno, e.what()});
    }
  }
  return ds;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto parent = std::filesystem::path(path).parent_path();
  return parse_dataset_csv(ss.str(), parent.empty() ? "." : parent.string());
}

}  // namespace rmat::molio
