#pragma once

#include <string>
#include <vector>

#include "bcs/learner.hpp"
#include "bcs/synth.hpp"

namespace bcs {

/// Dense matrices: little-endian float64, column-major, with a JSON sidecar
/// at `path + ".json"` holding {"rows", "cols"}.
void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

/// Dictionaries: the atom matrix in the dense format, sidecar {n, r, k_max, blocks}.
void save_dictionary(const BlockDictionary& dict, const std::string& path);
BlockDictionary load_dictionary(const std::string& path);

/// One line per signal with its observed coordinate indices.
void write_index_lists(const std::vector<std::vector<Index>>& lists, const std::string& path);
std::vector<std::vector<Index>> read_index_lists(const std::string& path);

/// Lines "u v value"; an optional "# rows cols" header fixes the shape,
/// otherwise it is taken from the largest indices.
void write_coordinate_list(const ObservationMatrix& obs, const std::string& path);
ObservationMatrix read_coordinate_list(const std::string& path);

/// signal_id,block_id,residual (block_id -1 when unassigned).
void write_assignment_csv(const BlockAssignment& assignment, const std::string& path);
/// iteration,block,objective with the running total after each block update;
/// block -1 rows hold the value after the whole pass.
void write_trace_csv(const std::vector<IterationRecord>& iterations, const std::string& path);
void write_phase_csv(const PhaseResult& result, const std::string& path);
void write_phase_summary_csv(const PhaseResult& result, const std::string& path);
/// Two columns, space separated, for plotting tools.
void write_phase_dat(const PhaseResult& result, const std::string& path);

/// Directory with dictionary.bin (+ sidecar), codes.csv, assignment.csv and objective.csv.
void save_checkpoint(const LearnerState& state, const std::string& dir);
LearnerState load_checkpoint(const std::string& dir);

/// Text form of a real for CSV and JSON-free outputs: shortest round-trip digits.
std::string format_real(double v);

}  // namespace bcs
