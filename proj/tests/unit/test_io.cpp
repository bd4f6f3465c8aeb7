#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/io.hpp"
#include "bcs/synth.hpp"

using namespace bcs;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bcs_io_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(MatrixIo, RoundTripBitwise) {
  const Matrix m = Matrix::Random(5, 3) * 1e7;
  const auto path = temp_path("m.bin");
  save_matrix(m, path);
  EXPECT_EQ(load_matrix(path), m);
  EXPECT_EQ(std::filesystem::file_size(path), 5u * 3u * 8u);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
  EXPECT_THROW(load_matrix(path), IoError);
}

TEST(DictionaryIo, KeepsBlocks) {
  const auto m = generate_planted(6, 3, 2, 4, 1);
  const BlockDictionary dict(m.dict.atoms(), {{4, 0}, {1, 2, 3}, {5}}, 3);
  const auto path = temp_path("d.bin");
  save_dictionary(dict, path);
  const auto back = load_dictionary(path);
  EXPECT_EQ(back.atoms(), dict.atoms());
  EXPECT_EQ(back.blocks(), dict.blocks());
  EXPECT_EQ(back.k_max(), 3);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST(IndexLists, RoundTrip) {
  const std::vector<std::vector<Index>> lists{{0, 3, 5}, {}, {1}};
  const auto path = temp_path("idx.txt");
  write_index_lists(lists, path);
  EXPECT_EQ(read_index_lists(path), lists);
  std::filesystem::remove(path);
}

TEST(CoordinateList, HeaderAndInference) {
  ObservationMatrix obs(4, 6);
  obs.set(0, 1, 2.5);
  obs.set(2, 3, -1.0 / 3.0);
  const auto path = temp_path("obs.txt");
  write_coordinate_list(obs, path);
  const auto back = read_coordinate_list(path);
  EXPECT_EQ(back.rows(), 4);
  EXPECT_EQ(back.cols(), 6);
  EXPECT_EQ(back.entries(), obs.entries());
  std::ofstream(path) << "0 0 1\n3 2 4\n";
  const auto inferred = read_coordinate_list(path);
  EXPECT_EQ(inferred.rows(), 4);
  EXPECT_EQ(inferred.cols(), 3);
  std::ofstream(path) << "0 x 1\n";
  EXPECT_THROW(read_coordinate_list(path), IoError);
  std::filesystem::remove(path);
}

TEST(AssignmentCsv, Format) {
  BlockAssignment a;
  a.block = {1, std::nullopt};
  a.residual = {0.5, 2.0};
  const auto path = temp_path("a.csv");
  write_assignment_csv(a, path);
  EXPECT_EQ(slurp(path), "signal_id,block_id,residual\n0,1,0.5\n1,-1,2\n");
  std::filesystem::remove(path);
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
}

TEST(PhaseFiles, Schema) {
  PhaseResult r;
  r.trials.push_back({0.5, 0, 41.0, true, ""});
  r.summary.push_back({0.5, 1.0});
  const auto csv = temp_path("p.csv"), sum = temp_path("s.csv"), dat = temp_path("p.dat");
  write_phase_csv(r, csv);
  write_phase_summary_csv(r, sum);
  write_phase_dat(r, dat);
  EXPECT_EQ(slurp(sum).substr(0, slurp(sum).find('\n')), "fraction,frequency");
  EXPECT_EQ(slurp(dat), "# fraction frequency\n0.5 1\n");
  EXPECT_NE(slurp(csv).find("0.5,0,41,1"), std::string::npos);
  for (const auto& p : {csv, sum, dat}) std::filesystem::remove(p);
}
