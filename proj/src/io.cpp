#include "bcs/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bcs/error.hpp"

namespace bcs {

namespace {

static_assert(std::endian::native == std::endian::little, "dense matrix files assume a little-endian host");

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_raw(const Matrix& m, const std::string& path) {
  auto out = open_out(path, true);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  finish(out, path);
}

Matrix read_raw(const std::string& path, Index rows, Index cols) {
  auto in = open_in(path, true);
  Matrix m(rows, cols);
  const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(m.data()), bytes);
  if (in.gcount() != bytes) throw IoError(path + ": expected " + std::to_string(bytes) + " bytes of matrix data");
  if (in.peek() != EOF) throw IoError(path + ": trailing bytes after matrix data");
  return m;
}

Index json_index(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number_integer()) throw IoError(path + ": sidecar lacks integer '" + key + "'");
  return j[key].get<Index>();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_real(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  if (s == "inf") return std::numeric_limits<double>::infinity();
  throw IoError(path + ": bad number '" + s + "'");
}

Index parse_index(const std::string& s, const std::string& path) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError(path + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void save_matrix(const Matrix& m, const std::string& path) {
  write_raw(m, path);
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto out = open_out(path + ".json");
  out << j.dump(2) << '\n';
  finish(out, path + ".json");
}

Matrix load_matrix(const std::string& path) {
  const auto j = read_json(path + ".json");
  const bool dict = j.contains("n") && j.contains("r");
  const Index rows = json_index(j, dict ? "n" : "rows", path + ".json");
  const Index cols = json_index(j, dict ? "r" : "cols", path + ".json");
  if (rows < 0 || cols < 0) throw IoError(path + ".json: negative dimensions");
  return read_raw(path, rows, cols);
}

void save_dictionary(const BlockDictionary& dict, const std::string& path) {
  write_raw(dict.atoms(), path);
  nlohmann::ordered_json j;
  j["n"] = dict.n();
  j["r"] = dict.r();
  j["k_max"] = dict.k_max();
  j["blocks"] = dict.blocks();
  auto out = open_out(path + ".json");
  out << j.dump(2) << '\n';
  finish(out, path + ".json");
}

BlockDictionary load_dictionary(const std::string& path) {
  const auto j = read_json(path + ".json");
  const Index n = json_index(j, "n", path + ".json");
  const Index r = json_index(j, "r", path + ".json");
  const Index k_max = json_index(j, "k_max", path + ".json");
  if (!j.contains("blocks") || !j["blocks"].is_array()) throw IoError(path + ".json: sidecar lacks 'blocks'");
  std::vector<std::vector<Index>> blocks;
  try {
    blocks = j["blocks"].get<std::vector<std::vector<Index>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ".json: bad 'blocks': " + e.what());
  }
  try {
    return BlockDictionary(read_raw(path, n, r), std::move(blocks), k_max);
  } catch (const ContractViolation& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_index_lists(const std::vector<std::vector<Index>>& lists, const std::string& path) {
  auto out = open_out(path);
  for (const auto& list : lists) {
    for (std::size_t j = 0; j < list.size(); ++j) out << (j ? " " : "") << list[j];
    out << '\n';
  }
  finish(out, path);
}

std::vector<std::vector<Index>> read_index_lists(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<Index>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<Index> list;
    std::string tok;
    while (ss >> tok) list.push_back(parse_index(tok, path));
    out.push_back(std::move(list));
  }
  return out;
}

void write_coordinate_list(const ObservationMatrix& obs, const std::string& path) {
  auto out = open_out(path);
  out << "# " << obs.rows() << ' ' << obs.cols() << '\n';
  for (const auto& [key, value] : obs.entries()) out << key.first << ' ' << key.second << ' ' << format_real(value) << '\n';
  finish(out, path);
}

ObservationMatrix read_coordinate_list(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  Index rows = -1, cols = -1, max_u = -1, max_v = -1;
  std::vector<std::tuple<Index, Index, double>> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    if (line[0] == '#') {
      std::string hash;
      ss >> hash >> rows >> cols;
      if (!ss) rows = cols = -1;
      continue;
    }
    std::string a, b, c;
    if (!(ss >> a >> b >> c)) throw IoError(path + ": expected 'u v value' in line '" + line + "'");
    const Index u = parse_index(a, path), v = parse_index(b, path);
    if (u < 0 || v < 0) throw IoError(path + ": negative index");
    entries.emplace_back(u, v, parse_real(c, path));
    max_u = std::max(max_u, u);
    max_v = std::max(max_v, v);
  }
  if (rows < 0) {
    rows = max_u + 1;
    cols = max_v + 1;
  }
  if (max_u >= rows || max_v >= cols) throw IoError(path + ": entry outside the declared shape");
  ObservationMatrix obs(rows, cols);
  for (const auto& [u, v, value] : entries) {
    if (!std::isfinite(value)) throw IoError(path + ": non-finite value");
    obs.set(u, v, value);
  }
  return obs;
}

void write_assignment_csv(const BlockAssignment& assignment, const std::string& path) {
  auto out = open_out(path);
  out << "signal_id,block_id,residual\n";
  for (Index i = 0; i < assignment.size(); ++i) {
    const auto& b = assignment.block[static_cast<std::size_t>(i)];
    out << i << ',' << (b ? *b : -1) << ',' << format_real(assignment.residual[static_cast<std::size_t>(i)]) << '\n';
  }
  finish(out, path);
}

void write_trace_csv(const std::vector<IterationRecord>& iterations, const std::string& path) {
  auto out = open_out(path);
  out << "iteration,block,objective\n";
  for (const auto& rec : iterations) {
    for (const auto& b : rec.pass) out << rec.iteration << ',' << b.block << ',' << format_real(b.objective_after) << '\n';
    out << rec.iteration << ",-1," << format_real(rec.objective_after_pass) << '\n';
  }
  finish(out, path);
}

void write_phase_csv(const PhaseResult& result, const std::string& path) {
  auto out = open_out(path);
  out << "fraction,trial,psnr_db,success,reason\n";
  for (const auto& t : result.trials) {
    std::string reason = t.reason;
    for (char& ch : reason)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    out << format_real(t.fraction) << ',' << t.trial << ',' << format_real(t.psnr_db) << ',' << (t.success ? 1 : 0)
        << ',' << reason << '\n';
  }
  finish(out, path);
}

void write_phase_summary_csv(const PhaseResult& result, const std::string& path) {
  auto out = open_out(path);
  out << "fraction,frequency\n";
  for (const auto& row : result.summary) out << format_real(row.fraction) << ',' << format_real(row.frequency) << '\n';
  finish(out, path);
}

void write_phase_dat(const PhaseResult& result, const std::string& path) {
  auto out = open_out(path);
  out << "# fraction frequency\n";
  for (const auto& row : result.summary) out << format_real(row.fraction) << ' ' << format_real(row.frequency) << '\n';
  finish(out, path);
}

void save_checkpoint(const LearnerState& state, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  save_dictionary(state.dict, (base / "dictionary.bin").string());
  write_assignment_csv(state.assignment, (base / "assignment.csv").string());
  {
    const std::string path = (base / "codes.csv").string();
    auto out = open_out(path);
    out << "signal_id,block_id,coefficients\n";
    for (std::size_t i = 0; i < state.codes.size(); ++i) {
      const auto& code = state.codes[i];
      out << i << ',' << (code.active_block ? *code.active_block : -1);
      if (code.active_block) {
        const Vector s = code.block_coefficients(state.dict);
        for (Index j = 0; j < s.size(); ++j) out << ',' << format_real(s(j));
      }
      out << '\n';
    }
    finish(out, path);
  }
  {
    const std::string path = (base / "objective.csv").string();
    auto out = open_out(path);
    out << "iteration,objective\n";
    for (std::size_t t = 0; t < state.objective_trace.size(); ++t)
      out << t + 1 << ',' << format_real(state.objective_trace[t]) << '\n';
    finish(out, path);
  }
}

LearnerState load_checkpoint(const std::string& dir) {
  const std::filesystem::path base(dir);
  LearnerState state;
  state.dict = load_dictionary((base / "dictionary.bin").string());
  {
    const std::string path = (base / "codes.csv").string();
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() < 2) throw IoError(path + ": short line '" + line + "'");
      if (parse_index(cells[0], path) != static_cast<Index>(state.codes.size()))
        throw IoError(path + ": signal ids must be consecutive from 0");
      const Index block = parse_index(cells[1], path);
      if (block < 0) {
        state.codes.push_back(BlockSparseCode::unassigned(state.dict.r()));
        continue;
      }
      if (block >= state.dict.num_blocks() || static_cast<Index>(cells.size()) != 2 + state.dict.block_size(block))
        throw IoError(path + ": block id or coefficient count does not match the dictionary");
      Vector s(state.dict.block_size(block));
      for (Index j = 0; j < s.size(); ++j) s(j) = parse_real(cells[static_cast<std::size_t>(2 + j)], path);
      state.codes.push_back(BlockSparseCode::on_block(state.dict, block, s));
    }
  }
  {
    const std::string path = (base / "assignment.csv").string();
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != 3) throw IoError(path + ": expected 3 columns in '" + line + "'");
      const Index block = parse_index(cells[1], path);
      state.assignment.block.push_back(block < 0 ? std::nullopt : std::optional<Index>(block));
      state.assignment.residual.push_back(parse_real(cells[2], path));
    }
  }
  if (state.assignment.size() != static_cast<Index>(state.codes.size()))
    throw IoError(dir + ": codes.csv and assignment.csv list different signal counts");
  {
    const std::string path = (base / "objective.csv").string();
    if (std::filesystem::exists(path)) {
      auto in = open_in(path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto cells = split_csv(line);
        if (cells.size() == 2) state.objective_trace.push_back(parse_real(cells[1], path));
      }
    }
  }
  return state;
}

}  // namespace bcs
