#include "bcs/bcs.h"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <string>

#include <json.hpp>

#include "bcs/completion.hpp"
#include "bcs/error.hpp"
#include "bcs/imaging.hpp"
#include "bcs/io.hpp"
#include "bcs/learner.hpp"
#include "bcs/synth.hpp"
#include "bcs/theory.hpp"

struct bcs_matrix {
  bcs::Matrix m;
};
struct bcs_measurements {
  bcs::MeasurementSet set;
};
struct bcs_learner_config {
  bcs::LearnerConfig cfg;
};
struct bcs_state {
  bcs::LearnerState st;
};
struct bcs_planted {
  bcs::PlantedModel model;
};
struct bcs_phase_result {
  bcs::PhaseResult result;
};
struct bcs_observation {
  bcs::ObservationMatrix obs;
};
struct bcs_image {
  bcs::GrayImage img;
};
struct bcs_inpaint_result {
  bcs_image image;
  bcs_state state;
  bcs::InpaintConfig config;
  std::vector<std::string> warnings;
};

namespace {

thread_local std::string g_last_error;

bcs_status fail(bcs_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
bcs_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return BCS_OK;
  } catch (const bcs::Error& e) {
    return fail(static_cast<bcs_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(BCS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BCS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BCS_ERR_INTERNAL, "unknown exception");
  }
}

template <class T>
T& deref(T* p, const char* what) {
  if (p == nullptr) throw bcs::ContractViolation(std::string(what) + " is NULL");
  return *p;
}

std::string str(const char* s, const char* what) {
  if (s == nullptr) throw bcs::ContractViolation(std::string(what) + " is NULL");
  return s;
}

void need_out(const void* out) {
  if (out == nullptr) throw bcs::ContractViolation("output pointer is NULL");
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw bcs::ContractViolation("config: '" + key + "' expects a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw bcs::ContractViolation("config: '" + key + "' expects true or false, got '" + value + "'");
}

bcs::IterationCallback progress_callback(bcs_progress_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const bcs::IterationRecord& rec) {
    fn(user, rec.iteration, rec.objective_after_pass, static_cast<int64_t>(rec.blocks));
  };
}

bcs::Index active_blocks(const bcs::LearnerState& st) {
  bcs::Index count = 0;
  for (const auto& members : st.assignment.members(st.dict.num_blocks()))
    if (!members.empty()) ++count;
  return count;
}

bcs::Mask mask_from_file(const std::string& path, bcs::Index height, bcs::Index width) {
  const bool pbm = path.size() >= 4 && path.compare(path.size() - 4, 4, ".pbm") == 0;
  if (pbm) {
    bcs::Mask mask = bcs::read_pbm(path);
    if (mask.rows() != height || mask.cols() != width)
      throw bcs::ContractViolation(path + ": mask size does not match the image");
    return mask;
  }
  bcs::Mask mask = bcs::Mask::Constant(height, width, false);
  for (const auto& line : bcs::read_index_lists(path))
    for (const bcs::Index idx : line) {
      if (idx < 0 || idx >= height * width) throw bcs::ContractViolation(path + ": pixel index out of range");
      mask(idx % height, idx / height) = true;
    }
  return mask;
}

}  // namespace

extern "C" {

const char* bcs_version(void) { return "1.0.0"; }

const char* bcs_last_error(void) { return g_last_error.c_str(); }

const char* bcs_status_name(bcs_status status) {
  switch (status) {
    case BCS_OK:
      return "ok";
    case BCS_ERR_CONTRACT:
      return "contract violation";
    case BCS_ERR_IO:
      return "i/o error";
    case BCS_ERR_NUMERICAL:
      return "numerical error";
    case BCS_ERR_NO_FEASIBLE_BLOCK:
      return "no feasible block";
    case BCS_ERR_EMPTY_BLOCK:
      return "empty block";
    case BCS_ERR_RANK_DEFICIENT:
      return "rank deficient";
    case BCS_ERR_DIVERGENCE:
      return "divergence";
    case BCS_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void bcs_string_free(char* s) { std::free(s); }

/* matrices */

bcs_status bcs_matrix_create(int64_t rows, int64_t cols, const double* data, bcs_matrix** out) {
  return guarded([&] {
    need_out(out);
    BCS_REQUIRE(rows >= 0 && cols >= 0, "matrix: negative dimensions");
    auto m = std::make_unique<bcs_matrix>();
    m->m = bcs::Matrix::Zero(rows, cols);
    if (data != nullptr) m->m = Eigen::Map<const bcs::Matrix>(data, rows, cols);
    *out = m.release();
  });
}

bcs_status bcs_matrix_load(const char* path, bcs_matrix** out) {
  return guarded([&] {
    need_out(out);
    auto m = std::make_unique<bcs_matrix>();
    m->m = bcs::load_matrix(str(path, "path"));
    *out = m.release();
  });
}

bcs_status bcs_matrix_save(const bcs_matrix* m, const char* path) {
  return guarded([&] { bcs::save_matrix(deref(m, "matrix").m, str(path, "path")); });
}

int64_t bcs_matrix_rows(const bcs_matrix* m) { return m ? m->m.rows() : 0; }
int64_t bcs_matrix_cols(const bcs_matrix* m) { return m ? m->m.cols() : 0; }
const double* bcs_matrix_data(const bcs_matrix* m) { return m ? m->m.data() : nullptr; }
void bcs_matrix_free(bcs_matrix* m) { delete m; }

bcs_status bcs_matrix_psnr(const bcs_matrix* reference, const bcs_matrix* estimate, double peak, double* out) {
  return guarded([&] {
    need_out(out);
    *out = bcs::signal_psnr(deref(reference, "reference").m, deref(estimate, "estimate").m, peak);
  });
}

/* measurements */

bcs_status bcs_measure_mask_file(const bcs_matrix* signals, const char* path, bcs_measurements** out) {
  return guarded([&] {
    need_out(out);
    const auto& x = deref(signals, "signals").m;
    const auto lists = bcs::read_index_lists(str(path, "path"));
    BCS_REQUIRE(static_cast<bcs::Index>(lists.size()) == x.cols(),
                "mask file lists " + std::to_string(lists.size()) + " signals, expected " + std::to_string(x.cols()));
    std::vector<bcs::SensingMatrix> sensors;
    sensors.reserve(lists.size());
    for (const auto& l : lists) sensors.push_back(bcs::make_pixel_mask(x.rows(), l));
    auto ms = std::make_unique<bcs_measurements>();
    ms->set = bcs::measure(x, std::move(sensors));
    *out = ms.release();
  });
}

bcs_status bcs_measure_random_pixels(const bcs_matrix* signals, double fraction, uint64_t seed,
                                     bcs_measurements** out) {
  return guarded([&] {
    need_out(out);
    const auto& x = deref(signals, "signals").m;
    auto ms = std::make_unique<bcs_measurements>();
    ms->set = bcs::measure(x, bcs::random_pixel_masks(x.rows(), x.cols(), fraction, seed));
    *out = ms.release();
  });
}

bcs_status bcs_measure_random_gaussian(const bcs_matrix* signals, double fraction, uint64_t seed,
                                       bcs_measurements** out) {
  return guarded([&] {
    need_out(out);
    const auto& x = deref(signals, "signals").m;
    auto ms = std::make_unique<bcs_measurements>();
    ms->set = bcs::measure(x, bcs::random_gaussian_sensors(x.rows(), x.cols(), fraction, seed));
    *out = ms.release();
  });
}

bcs_status bcs_measurements_save_masks(const bcs_measurements* ms, const char* path) {
  return guarded([&] {
    std::vector<std::vector<bcs::Index>> lists;
    for (const auto& item : deref(ms, "measurements").set.items()) {
      BCS_REQUIRE(item.sensor.kind() == bcs::SensingKind::kPixelMask, "only pixel masks can be saved as index lists");
      lists.push_back(item.sensor.row_ids());
    }
    bcs::write_index_lists(lists, str(path, "path"));
  });
}

int64_t bcs_measurements_count(const bcs_measurements* ms) { return ms ? ms->set.size() : 0; }
void bcs_measurements_free(bcs_measurements* ms) { delete ms; }

/* learner */

bcs_status bcs_learner_config_create(bcs_learner_config** out) {
  return guarded([&] {
    need_out(out);
    *out = new bcs_learner_config();
  });
}

bcs_status bcs_learner_config_set(bcs_learner_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    auto& c = deref(cfg, "config").cfg;
    const std::string k = str(key, "key");
    const std::string v = str(value, "value");
    if (k == "k_max")
      c.k_max = parse_number<bcs::Index>(k, v);
    else if (k == "r")
      c.r = parse_number<bcs::Index>(k, v);
    else if (k == "L_init")
      c.L_init = parse_number<bcs::Index>(k, v);
    else if (k == "max_outer_iters")
      c.max_outer_iters = parse_number<int>(k, v);
    else if (k == "restarts")
      c.restarts = parse_number<int>(k, v);
    else if (k == "objective_rel_tol")
      c.objective_rel_tol = parse_number<double>(k, v);
    else if (k == "sac_threshold")
      c.sac_threshold = parse_number<double>(k, v);
    else if (k == "sac_every")
      c.sac_every = parse_number<int>(k, v);
    else if (k == "usage_energy_fraction")
      c.usage_energy_fraction = parse_number<double>(k, v);
    else if (k == "seed")
      c.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "reseed_dead_blocks")
      c.reseed_dead_blocks = parse_bool(k, v);
    else if (k == "reseed_rank_deficient")
      c.reseed_rank_deficient = parse_bool(k, v);
    else if (k == "init")
      c.init = bcs::parse_init_mode(v);
    else if (k == "method")
      c.method = bcs::parse_dict_update_method(v);
    else if (k == "max_condition")
      c.max_condition = parse_number<double>(k, v);
    else if (k == "threads")
      c.threads = parse_number<int>(k, v);
    else
      throw bcs::ContractViolation("config: unknown learner key '" + k + "'");
  });
}

void bcs_learner_config_free(bcs_learner_config* cfg) { delete cfg; }

bcs_status bcs_learn(const bcs_measurements* ms, const bcs_learner_config* cfg, const bcs_state* resume,
                     bcs_progress_fn progress, void* user, bcs_state** out) {
  return guarded([&] {
    need_out(out);
    auto st = std::make_unique<bcs_state>();
    st->st = bcs::learn(deref(ms, "measurements").set, deref(cfg, "config").cfg, resume ? &resume->st : nullptr,
                        progress_callback(progress, user));
    *out = st.release();
  });
}

bcs_status bcs_state_from_dictionary(const bcs_measurements* ms, const char* dictionary_path, bcs_state** out) {
  return guarded([&] {
    need_out(out);
    const auto& set = deref(ms, "measurements").set;
    auto st = std::make_unique<bcs_state>();
    st->st.dict = bcs::load_dictionary(str(dictionary_path, "dictionary path"));
    BCS_REQUIRE(st->st.dict.n() == set.n(), "dictionary dimension does not match the measurements");
    bcs::BompOptions opts;
    opts.allow_unassigned = true;
    auto res = bcs::bomp_assign_all(set, st->st.dict, opts);
    st->st.codes = std::move(res.codes);
    st->st.assignment = std::move(res.assignment);
    st->st.warnings = std::move(res.warnings);
    st->st.objective_trace.push_back(bcs::objective(set, st->st.dict, st->st.codes));
    *out = st.release();
  });
}

bcs_status bcs_state_load_checkpoint(const char* dir, bcs_state** out) {
  return guarded([&] {
    need_out(out);
    auto st = std::make_unique<bcs_state>();
    st->st = bcs::load_checkpoint(str(dir, "directory"));
    *out = st.release();
  });
}

bcs_status bcs_state_save_checkpoint(const bcs_state* st, const char* dir) {
  return guarded([&] { bcs::save_checkpoint(deref(st, "state").st, str(dir, "directory")); });
}

bcs_status bcs_state_save_dictionary(const bcs_state* st, const char* path) {
  return guarded([&] { bcs::save_dictionary(deref(st, "state").st.dict, str(path, "path")); });
}

bcs_status bcs_state_write_assignment_csv(const bcs_state* st, const char* path) {
  return guarded([&] { bcs::write_assignment_csv(deref(st, "state").st.assignment, str(path, "path")); });
}

bcs_status bcs_state_write_trace_csv(const bcs_state* st, const char* path) {
  return guarded([&] { bcs::write_trace_csv(deref(st, "state").st.iterations, str(path, "path")); });
}

bcs_status bcs_state_reconstruct(const bcs_state* st, bcs_matrix** out) {
  return guarded([&] {
    need_out(out);
    const auto& s = deref(st, "state").st;
    auto m = std::make_unique<bcs_matrix>();
    m->m = bcs::reconstruct_all(s.dict, s.codes);
    *out = m.release();
  });
}

int bcs_state_iterations(const bcs_state* st) { return st ? static_cast<int>(st->st.iterations.size()) : 0; }

double bcs_state_objective(const bcs_state* st) {
  if (st == nullptr || st->st.objective_trace.empty()) return std::numeric_limits<double>::quiet_NaN();
  return st->st.objective_trace.back();
}

int64_t bcs_state_blocks(const bcs_state* st) { return st ? st->st.dict.num_blocks() : 0; }
int64_t bcs_state_active_blocks(const bcs_state* st) { return st ? active_blocks(st->st) : 0; }
int64_t bcs_state_warning_count(const bcs_state* st) {
  return st ? static_cast<int64_t>(st->st.warnings.size()) : 0;
}

const char* bcs_state_warning(const bcs_state* st, int64_t index) {
  if (st == nullptr || index < 0 || index >= static_cast<int64_t>(st->st.warnings.size())) return nullptr;
  return st->st.warnings[static_cast<std::size_t>(index)].c_str();
}

void bcs_state_free(bcs_state* st) { delete st; }

/* planted data */

bcs_status bcs_planted_generate(int64_t n, int64_t L, int64_t k, int64_t count, uint64_t seed, bcs_planted** out) {
  return guarded([&] {
    need_out(out);
    auto p = std::make_unique<bcs_planted>();
    p->model = bcs::generate_planted(n, L, k, count, seed);
    *out = p.release();
  });
}

bcs_status bcs_planted_signals(const bcs_planted* p, bcs_matrix** out) {
  return guarded([&] {
    need_out(out);
    auto m = std::make_unique<bcs_matrix>();
    m->m = deref(p, "planted model").model.signals;
    *out = m.release();
  });
}

bcs_status bcs_planted_save_dictionary(const bcs_planted* p, const char* path) {
  return guarded([&] { bcs::save_dictionary(deref(p, "planted model").model.dict, str(path, "path")); });
}

bcs_status bcs_planted_write_labels_csv(const bcs_planted* p, const char* path) {
  return guarded([&] {
    const auto& model = deref(p, "planted model").model;
    bcs::BlockAssignment a;
    for (const bcs::Index l : model.labels) {
      a.block.emplace_back(l);
      a.residual.push_back(0.0);
    }
    bcs::write_assignment_csv(a, str(path, "path"));
  });
}

bcs_status bcs_planted_state(const bcs_planted* p, const bcs_measurements* ms, bcs_state** out) {
  return guarded([&] {
    need_out(out);
    const auto& model = deref(p, "planted model").model;
    const auto& set = deref(ms, "measurements").set;
    BCS_REQUIRE(set.size() == model.signals.cols() && set.n() == model.dict.n(),
                "measurements do not belong to the planted model");
    auto st = std::make_unique<bcs_state>();
    st->st.dict = model.dict;
    st->st.codes = model.codes;
    const bcs::Vector res = bcs::squared_residuals(set, model.dict, model.codes);
    for (std::size_t i = 0; i < model.labels.size(); ++i) {
      st->st.assignment.block.emplace_back(model.labels[i]);
      st->st.assignment.residual.push_back(std::sqrt(res(static_cast<bcs::Index>(i))));
    }
    st->st.objective_trace.push_back(res.sum());
    *out = st.release();
  });
}

bcs_status bcs_planted_psnr(const bcs_planted* p, const bcs_matrix* estimate, double* out) {
  return guarded([&] {
    need_out(out);
    *out = bcs::signal_psnr(deref(p, "planted model").model.signals, deref(estimate, "estimate").m);
  });
}

void bcs_planted_free(bcs_planted* p) { delete p; }

/* phase transition */

void bcs_phase_params_default(bcs_phase_params* params) {
  if (params == nullptr) return;
  const bcs::PhaseConfig d;
  params->n = d.n;
  params->L = d.L;
  params->k = d.k;
  params->count = d.count;
  params->fractions = nullptr;
  params->num_fractions = 0;
  params->trials = d.trials;
  params->threshold_db = d.threshold_db;
  params->seed = d.seed;
  params->threads = d.threads;
  params->size_learner = d.size_learner ? 1 : 0;
}

namespace {

bcs::PhaseConfig phase_config(const bcs_phase_params& p, const bcs_learner_config* cfg) {
  bcs::PhaseConfig c;
  c.n = p.n;
  c.L = p.L;
  c.k = p.k;
  c.count = p.count;
  if (p.fractions != nullptr && p.num_fractions > 0) c.fractions.assign(p.fractions, p.fractions + p.num_fractions);
  c.trials = p.trials;
  c.threshold_db = p.threshold_db;
  c.seed = p.seed;
  c.threads = p.threads;
  c.size_learner = p.size_learner != 0;
  if (cfg != nullptr) c.learner = cfg->cfg;
  return c;
}

}  // namespace

bcs_status bcs_phase_run(const bcs_phase_params* params, const bcs_learner_config* cfg, bcs_phase_result** out) {
  return guarded([&] {
    need_out(out);
    auto r = std::make_unique<bcs_phase_result>();
    r->result = bcs::phase_transition(phase_config(deref(params, "phase parameters"), cfg));
    *out = r.release();
  });
}

bcs_status bcs_phase_run_image(const bcs_phase_params* params, const bcs_learner_config* cfg,
                               const bcs_image* image, int64_t patch, const bcs_learner_config* cluster_cfg,
                               bcs_phase_result** out) {
  return guarded([&] {
    need_out(out);
    const auto& p = deref(params, "phase parameters");
    const auto& img = deref(image, "image").img;
    bcs::LearnerConfig lc;
    if (cluster_cfg != nullptr) {
      lc = cluster_cfg->cfg;
    } else {
      lc.k_max = p.k;
      lc.seed = p.seed;
      lc.threads = p.threads;
    }
    const bcs::PlantedModel model = bcs::truncated_image_model(img, p.k, lc, patch);
    auto r = std::make_unique<bcs_phase_result>();
    r->result = bcs::phase_transition(phase_config(p, cfg), model);
    *out = r.release();
  });
}

bcs_status bcs_phase_write(const bcs_phase_result* r, const char* trials_csv, const char* summary_csv,
                           const char* dat_path) {
  return guarded([&] {
    const auto& res = deref(r, "phase result").result;
    if (trials_csv) bcs::write_phase_csv(res, trials_csv);
    if (summary_csv) bcs::write_phase_summary_csv(res, summary_csv);
    if (dat_path) bcs::write_phase_dat(res, dat_path);
  });
}

int64_t bcs_phase_rows(const bcs_phase_result* r) { return r ? static_cast<int64_t>(r->result.summary.size()) : 0; }

double bcs_phase_fraction(const bcs_phase_result* r, int64_t row) {
  if (r == nullptr || row < 0 || row >= bcs_phase_rows(r)) return std::numeric_limits<double>::quiet_NaN();
  return r->result.summary[static_cast<std::size_t>(row)].fraction;
}

double bcs_phase_frequency(const bcs_phase_result* r, int64_t row) {
  if (r == nullptr || row < 0 || row >= bcs_phase_rows(r)) return std::numeric_limits<double>::quiet_NaN();
  return r->result.summary[static_cast<std::size_t>(row)].frequency;
}

void bcs_phase_free(bcs_phase_result* r) { delete r; }

/* conditions */

void bcs_check_params_default(bcs_check_params* params) {
  if (params == nullptr) return;
  params->max_subset = bcs::UniquenessOptions{}.max_subset;
  params->beta = bcs::Proposition1Options{}.beta;
  params->seed = 0;
}

bcs_status bcs_check_conditions(const bcs_measurements* ms, const bcs_state* st, const bcs_check_params* params,
                                char** json, int* overall) {
  return guarded([&] {
    need_out(json);
    const auto& set = deref(ms, "measurements").set;
    const auto& s = deref(st, "state").st;
    BCS_REQUIRE(set.size() == static_cast<bcs::Index>(s.codes.size()), "state and measurements differ in size");
    bcs_check_params p;
    bcs_check_params_default(&p);
    if (params != nullptr) p = *params;
    bcs::UniquenessOptions uo;
    uo.max_subset = p.max_subset;
    uo.seed = p.seed;
    bcs::Proposition1Options po;
    po.beta = p.beta;
    std::vector<bcs::SensingMatrix> sensors;
    for (const auto& item : set.items()) sensors.push_back(item.sensor);
    const bcs::UnionMatrix uni = bcs::build_union(sensors);
    const auto uniq = bcs::check_dl_uniqueness(s.dict, s.codes, &uni, uo);
    const auto prop = bcs::proposition1_check(set, s.dict, s.assignment, po);
    nlohmann::ordered_json j;
    j["overall"] = uniq.overall && prop.overall;
    j["dl_uniqueness"] = nlohmann::ordered_json::parse(uniq.to_json(-1));
    j["proposition1"] = nlohmann::ordered_json::parse(prop.to_json(-1));
    *json = dup_string(j.dump(2));
    if (overall) *overall = uniq.overall && prop.overall ? 1 : 0;
  });
}

/* completion */

bcs_status bcs_observation_load(const char* path, bcs_observation** out) {
  return guarded([&] {
    need_out(out);
    *out = new bcs_observation{bcs::read_coordinate_list(str(path, "path"))};
  });
}

bcs_status bcs_observation_save(const bcs_observation* obs, const char* path) {
  return guarded([&] { bcs::write_coordinate_list(deref(obs, "observation").obs, str(path, "path")); });
}

bcs_status bcs_observation_low_rank_example(int64_t rows, int64_t cols, int64_t rank, double fraction, uint64_t seed,
                                            bcs_observation** obs, bcs_matrix** truth) {
  return guarded([&] {
    need_out(obs);
    BCS_REQUIRE(fraction > 0.0 && fraction <= 1.0, "observed fraction must lie in (0, 1]");
    bcs::Matrix full = bcs::random_low_rank(rows, cols, rank, seed);
    auto o = std::make_unique<bcs_observation>(bcs_observation{bcs::sample_entries(full, fraction, seed + 1)});
    if (truth != nullptr) *truth = new bcs_matrix{std::move(full)};
    *obs = o.release();
  });
}

int64_t bcs_observation_rows(const bcs_observation* obs) { return obs ? obs->obs.rows() : 0; }
int64_t bcs_observation_cols(const bcs_observation* obs) { return obs ? obs->obs.cols() : 0; }
int64_t bcs_observation_count(const bcs_observation* obs) { return obs ? obs->obs.observed_count() : 0; }
void bcs_observation_free(bcs_observation* obs) { delete obs; }

void bcs_svt_params_default(bcs_svt_params* params) {
  if (params == nullptr) return;
  const bcs::SvtConfig d;
  params->tau = 0.0;
  params->delta = 0.0;
  params->max_iters = d.max_iters;
  params->tol = d.tol;
}

bcs_status bcs_svt_complete(const bcs_observation* obs, const bcs_svt_params* params, bcs_matrix** out,
                            int* iterations, double* residual) {
  return guarded([&] {
    need_out(out);
    const auto& o = deref(obs, "observation").obs;
    bcs_svt_params p;
    bcs_svt_params_default(&p);
    if (params != nullptr) p = *params;
    bcs::SvtConfig c = bcs::SvtConfig::standard(o.rows(), o.cols(), o.observed_count());
    if (p.tau > 0.0) c.tau = p.tau;
    if (p.delta > 0.0) c.delta = p.delta;
    c.max_iters = p.max_iters;
    c.tol = p.tol;
    auto res = bcs::svt_complete(o, c);
    if (iterations) *iterations = res.iterations;
    if (residual) *residual = res.residual;
    *out = new bcs_matrix{std::move(res.y)};
  });
}

bcs_status bcs_factor_completed(const bcs_matrix* completed, const bcs_matrix* union_rows, int64_t k, bcs_matrix** d,
                                bcs_matrix** s, double* residual) {
  return guarded([&] {
    need_out(d);
    const auto uni = bcs::UnionMatrix::pool(deref(union_rows, "union rows").m);
    auto f = bcs::factor_completed(deref(completed, "completed matrix").m, uni, k);
    if (residual) *residual = f.residual;
    auto dm = std::make_unique<bcs_matrix>(bcs_matrix{std::move(f.d)});
    if (s != nullptr) *s = new bcs_matrix{std::move(f.s)};
    *d = dm.release();
  });
}

/* images */

bcs_status bcs_image_load(const char* path, bcs_image** out) {
  return guarded([&] {
    need_out(out);
    *out = new bcs_image{bcs::read_image(str(path, "path"))};
  });
}

bcs_status bcs_image_save(const bcs_image* img, const char* path) {
  return guarded([&] { bcs::write_image(deref(img, "image").img, str(path, "path")); });
}

int64_t bcs_image_height(const bcs_image* img) { return img ? img->img.height() : 0; }
int64_t bcs_image_width(const bcs_image* img) { return img ? img->img.width() : 0; }

bcs_status bcs_image_mask_random(const bcs_image* img, double fraction, uint64_t seed, bcs_image** out) {
  return guarded([&] {
    need_out(out);
    const auto& g = deref(img, "image").img;
    *out = new bcs_image{bcs::apply_mask(g, bcs::make_random_mask(g.height(), g.width(), fraction, seed))};
  });
}

bcs_status bcs_image_mask_file(const bcs_image* img, const char* path, bcs_image** out) {
  return guarded([&] {
    need_out(out);
    const auto& g = deref(img, "image").img;
    *out = new bcs_image{bcs::apply_mask(g, mask_from_file(str(path, "path"), g.height(), g.width()))};
  });
}

bcs_status bcs_image_save_mask(const bcs_image* img, const char* path) {
  return guarded([&] {
    const auto& g = deref(img, "image").img;
    bcs::write_pbm(g.has_mask() ? g.mask : bcs::Mask::Constant(g.height(), g.width(), true), str(path, "path"));
  });
}

double bcs_image_psnr(const bcs_image* reference, const bcs_image* estimate) {
  if (reference == nullptr || estimate == nullptr) return std::numeric_limits<double>::quiet_NaN();
  try {
    return bcs::psnr(reference->img, estimate->img);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return std::numeric_limits<double>::quiet_NaN();
  }
}

void bcs_image_free(bcs_image* img) { delete img; }

void bcs_inpaint_params_default(bcs_inpaint_params* params) {
  if (params == nullptr) return;
  const bcs::InpaintConfig d;
  params->patch = d.patch;
  params->method = BCS_INPAINT_ALS;
  params->keep_observed = d.keep_observed ? 1 : 0;
  params->svt_tau = d.svt_tau;
  params->svt_delta = d.svt_delta;
  params->svt_max_iters = d.svt_max_iters;
  params->svt_tol = d.svt_tol;
  params->threads = d.threads;
}

bcs_status bcs_inpaint(const bcs_image* observed, const bcs_learner_config* cfg, const bcs_inpaint_params* params,
                       bcs_progress_fn progress, void* user, bcs_inpaint_result** out) {
  return guarded([&] {
    need_out(out);
    bcs_inpaint_params p;
    bcs_inpaint_params_default(&p);
    if (params != nullptr) p = *params;
    bcs::InpaintConfig c;
    c.patch = p.patch;
    if (cfg != nullptr) c.learner = cfg->cfg;
    c.method = p.method == BCS_INPAINT_SVT ? bcs::InpaintMethod::kSvt : bcs::InpaintMethod::kAls;
    c.keep_observed = p.keep_observed != 0;
    c.svt_tau = p.svt_tau;
    c.svt_delta = p.svt_delta;
    c.svt_max_iters = p.svt_max_iters;
    c.svt_tol = p.svt_tol;
    c.threads = p.threads;
    auto res = bcs::inpaint(deref(observed, "observed image").img, c, progress_callback(progress, user));
    auto r = std::make_unique<bcs_inpaint_result>();
    r->image.img = std::move(res.image);
    r->state.st = std::move(res.state);
    r->config = c;
    r->warnings = std::move(res.warnings);
    *out = r.release();
  });
}

const bcs_image* bcs_inpaint_image(const bcs_inpaint_result* r) { return r ? &r->image : nullptr; }
const bcs_state* bcs_inpaint_state(const bcs_inpaint_result* r) { return r ? &r->state : nullptr; }

bcs_status bcs_inpaint_metrics_json(const bcs_inpaint_result* r, const bcs_image* original, const bcs_image* observed,
                                    char** json) {
  return guarded([&] {
    need_out(json);
    const auto& res = deref(r, "inpaint result");
    const auto& obs = deref(observed, "observed image").img;
    bcs::InpaintResult view;
    view.image = res.image.img;
    view.state = res.state.st;
    if (original != nullptr) {
      *json = dup_string(bcs::metrics_json(bcs::inpaint_metrics(original->img, obs, view, res.config)));
      return;
    }
    const double total = static_cast<double>(obs.height() * obs.width());
    const double seen = obs.has_mask() ? static_cast<double>(obs.mask.count()) : total;
    nlohmann::ordered_json j;
    j["psnr_db"] = nullptr;
    j["observed_fraction"] = total > 0 ? seen / total : 0.0;
    j["k_max"] = res.config.learner.k_max;
    j["r"] = res.config.learner.r;
    j["L"] = active_blocks(res.state.st);
    j["iterations"] = res.state.st.iterations.size();
    j["psnr_missing_db"] = nullptr;
    j["zero_fill_psnr_db"] = nullptr;
    j["tile_mean_psnr_db"] = nullptr;
    *json = dup_string(j.dump(2));
  });
}

void bcs_inpaint_free(bcs_inpaint_result* r) { delete r; }

}  // extern "C"
