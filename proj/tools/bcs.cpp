// bcs: command-line front end over the C interface.
#include <bcs/bcs.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };
Level g_level = Level::kInfo;

void log(Level level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= g_level) std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

// Thrown on a failed C call; carries the status as the exit code.
struct Failure {
  bcs_status status;
  std::string message;
};

void check(bcs_status s) {
  if (s != BCS_OK) throw Failure{s, bcs_last_error()};
}

void usage_error(const std::string& msg) { throw Failure{BCS_ERR_CONTRACT, msg}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
template <class T, void (*Free)(T*)>
using Handle = std::unique_ptr<T, Deleter<T, Free>>;

using Matrix = Handle<bcs_matrix, bcs_matrix_free>;
using Measurements = Handle<bcs_measurements, bcs_measurements_free>;
using LearnerConfig = Handle<bcs_learner_config, bcs_learner_config_free>;
using State = Handle<bcs_state, bcs_state_free>;
using Planted = Handle<bcs_planted, bcs_planted_free>;
using Phase = Handle<bcs_phase_result, bcs_phase_free>;
using Observation = Handle<bcs_observation, bcs_observation_free>;
using Image = Handle<bcs_image, bcs_image_free>;
using InpaintResult = Handle<bcs_inpaint_result, bcs_inpaint_free>;

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { bcs_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

struct Global {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = ".";
  std::string log_level = "info";
  std::string config;
  // flat key=value pairs from --config
  std::map<std::string, std::string> file;
};

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{BCS_ERR_IO, "cannot open config file '" + path + "'"};
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) usage_error(path + ":" + std::to_string(number) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    for (char& c : key)
      if (c == '-') c = '_';
    static const std::map<std::string, std::string> aliases{
        {"atoms", "r"}, {"iters", "max_outer_iters"}, {"blocks_init", "L_init"}, {"tol", "objective_rel_tol"},
        {"update", "method"}, {"reseed", "reseed_dead_blocks"}};
    if (const auto a = aliases.find(key); a != aliases.end()) key = a->second;
    static const std::set<std::string> known{
        "seed", "threads", "output_dir", "log_level", "k_max", "r", "L_init", "max_outer_iters", "restarts",
        "objective_rel_tol", "sac_threshold", "sac_every", "usage_energy_fraction", "reseed_dead_blocks",
        "reseed_rank_deficient", "init", "method", "max_condition"};
    if (!known.count(key)) usage_error(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

// Learner flags shared by learn, inpaint and phase. Values stay as text and
// go through bcs_learner_config_set, after the config file.
struct LearnerFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app, bool phase_defaults = false) {
    auto add = [&](const std::string& flag, const std::string& key, const std::string& help) {
      app->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { values[key] = v; }, help);
    };
    add("--k-max", "k_max", phase_defaults ? "largest block size (default k)" : "largest block size (default 8)");
    add("-r,--atoms", "r", phase_defaults ? "dictionary atoms (default 2 L k)" : "dictionary atoms (default 256)");
    add("--blocks-init", "L_init", "initial block count, 0 = r singletons");
    add("--iters", "max_outer_iters", phase_defaults ? "outer iterations (default 50)" : "outer iterations (default 10)");
    add("--restarts", "restarts",
        phase_defaults ? "independent runs, best objective kept (default 3)"
                       : "independent runs, best objective kept (default 1)");
    add("--tol", "objective_rel_tol", "relative objective decrease to stop (default 1e-5)");
    add("--sac-threshold", "sac_threshold", "merge similarity threshold (default 0.1)");
    add("--sac-every", "sac_every", "run SAC every N iterations, 0 disables (default 1)");
    add("--init", "init", "random or signals");
    add("--update", "method", "dictionary update: auto, dense, normal or pixel");
    add("--reseed", "reseed_dead_blocks", "reseed dead blocks (true/false)");
  }
};

const char* const kLearnerKeys[] = {"k_max",       "r",          "L_init",        "max_outer_iters", "restarts",
                                    "objective_rel_tol", "sac_threshold", "sac_every", "usage_energy_fraction",
                                    "reseed_dead_blocks", "reseed_rank_deficient", "init", "method",
                                    "max_condition"};

LearnerConfig make_learner_config(const Global& g, const LearnerFlags& flags,
                                  const std::map<std::string, std::string>& defaults = {}) {
  bcs_learner_config* raw = nullptr;
  check(bcs_learner_config_create(&raw));
  LearnerConfig cfg(raw);
  for (const auto& [k, v] : defaults) check(bcs_learner_config_set(raw, k.c_str(), v.c_str()));
  for (const char* key : kLearnerKeys) {
    const auto it = g.file.find(key);
    if (it != g.file.end()) check(bcs_learner_config_set(raw, key, it->second.c_str()));
  }
  for (const auto& [k, v] : flags.values) check(bcs_learner_config_set(raw, k.c_str(), v.c_str()));
  check(bcs_learner_config_set(raw, "seed", std::to_string(g.seed).c_str()));
  check(bcs_learner_config_set(raw, "threads", std::to_string(g.threads).c_str()));
  return cfg;
}

std::string out_path(const Global& g, const std::string& name) { return (fs::path(g.output_dir) / name).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text << "\n";
  if (!out) throw Failure{BCS_ERR_IO, "failed writing '" + path + "'"};
}

nlohmann::ordered_json real_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

void progress(void* user, int iteration, double objective, int64_t blocks) {
  (void)user;
  if (g_level >= Level::kInfo) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "iteration %d: objective %.6g, %lld blocks", iteration, objective,
                  static_cast<long long>(blocks));
    log(Level::kInfo, buf);
  }
}

void report_warnings(const bcs_state* st) {
  const int64_t n = bcs_state_warning_count(st);
  for (int64_t i = 0; i < n; ++i) log(Level::kWarn, bcs_state_warning(st, i));
}

Measurements load_measurements(const Global& g, const Matrix& signals, const std::string& masks,
                               std::optional<double> fraction, const std::string& sensing) {
  bcs_measurements* raw = nullptr;
  if (!masks.empty())
    check(bcs_measure_mask_file(signals.get(), masks.c_str(), &raw));
  else if (sensing == "gaussian")
    check(bcs_measure_random_gaussian(signals.get(), *fraction, g.seed, &raw));
  else
    check(bcs_measure_random_pixels(signals.get(), *fraction, g.seed, &raw));
  return Measurements(raw);
}

Matrix load_matrix(const std::string& path) {
  bcs_matrix* raw = nullptr;
  check(bcs_matrix_load(path.c_str(), &raw));
  return Matrix(raw);
}

// ---- subcommands ----

struct SensingFlags {
  std::string signals;
  std::string masks;
  std::optional<double> fraction;
  std::string sensing = "pixel";

  void attach(CLI::App* app, bool signals_required = true) {
    auto* s = app->add_option("--signals", signals, "signal matrix (.bin with .json sidecar)")
                  ->check(CLI::ExistingFile);
    if (signals_required) s->required();
    auto* m = app->add_option("--masks", masks, "observed index lists, one line per signal")->check(CLI::ExistingFile);
    auto* f = app->add_option("--fraction", fraction, "draw random sensing with this fraction of measurements")
                  ->check(CLI::Range(0.0, 1.0));
    m->excludes(f);
    app->add_option("--sensing", sensing, "pixel or gaussian, used with --fraction")
        ->check(CLI::IsMember({"pixel", "gaussian"}));
  }

  void validate() const {
    if (masks.empty() && !fraction) usage_error("one of --masks or --fraction is required");
    if (fraction && *fraction <= 0.0) usage_error("--fraction must be positive");
  }
};

struct LearnCmd {
  SensingFlags sensing;
  LearnerFlags learner;
  std::string resume;

  int run(const Global& g) {
    sensing.validate();
    const Matrix signals = load_matrix(sensing.signals);
    const auto ms = load_measurements(g, signals, sensing.masks, sensing.fraction, sensing.sensing);
    const auto cfg = make_learner_config(g, learner);
    State resume_state;
    if (!resume.empty()) {
      bcs_state* raw = nullptr;
      check(bcs_state_load_checkpoint(resume.c_str(), &raw));
      resume_state.reset(raw);
      log(Level::kInfo, "resuming from " + resume);
    }
    bcs_state* raw = nullptr;
    check(bcs_learn(ms.get(), cfg.get(), resume_state.get(), progress, nullptr, &raw));
    const State st(raw);
    report_warnings(st.get());

    check(bcs_state_save_checkpoint(st.get(), out_path(g, "checkpoint").c_str()));
    check(bcs_state_save_dictionary(st.get(), out_path(g, "dictionary.bin").c_str()));
    check(bcs_state_write_assignment_csv(st.get(), out_path(g, "assignment.csv").c_str()));
    check(bcs_state_write_trace_csv(st.get(), out_path(g, "trace.csv").c_str()));
    bcs_matrix* rec_raw = nullptr;
    check(bcs_state_reconstruct(st.get(), &rec_raw));
    const Matrix rec(rec_raw);
    check(bcs_matrix_save(rec.get(), out_path(g, "reconstruction.bin").c_str()));
    double psnr = 0.0;
    check(bcs_matrix_psnr(signals.get(), rec.get(), 0.0, &psnr));

    nlohmann::ordered_json j;
    j["objective"] = bcs_state_objective(st.get());
    j["iterations"] = bcs_state_iterations(st.get());
    j["blocks"] = bcs_state_blocks(st.get());
    j["active_blocks"] = bcs_state_active_blocks(st.get());
    j["psnr_db"] = real_or_string(psnr);
    write_text(out_path(g, "summary.json"), j.dump(2));
    std::cout << j.dump(2) << "\n";
    return 0;
  }
};

struct SynthCmd {
  std::int64_t n = 32, L = 3, k = 4, count = 128;
  double fraction = 0.5;
  std::string sensing = "pixel";

  int run(const Global& g) {
    bcs_planted* raw = nullptr;
    check(bcs_planted_generate(n, L, k, count, g.seed, &raw));
    const Planted p(raw);
    bcs_matrix* sig_raw = nullptr;
    check(bcs_planted_signals(p.get(), &sig_raw));
    const Matrix signals(sig_raw);
    check(bcs_matrix_save(signals.get(), out_path(g, "signals.bin").c_str()));
    check(bcs_planted_save_dictionary(p.get(), out_path(g, "dictionary.bin").c_str()));
    check(bcs_planted_write_labels_csv(p.get(), out_path(g, "labels.csv").c_str()));
    if (sensing == "pixel") {
      bcs_measurements* ms = nullptr;
      check(bcs_measure_random_pixels(signals.get(), fraction, g.seed + 1, &ms));
      const Measurements owned(ms);
      check(bcs_measurements_save_masks(owned.get(), out_path(g, "masks.txt").c_str()));
    }
    log(Level::kInfo, "wrote " + std::to_string(bcs_matrix_cols(signals.get())) + " signals to " + g.output_dir);
    return 0;
  }
};

struct PhaseCmd {
  std::int64_t n = 32, L = 3, k = 4, count = 128;
  std::vector<double> fractions;
  int trials = 10;
  double threshold = 40.0;
  std::string image;
  std::int64_t patch = 8;
  LearnerFlags learner;

  int run(const Global& g) {
    bcs_phase_params p;
    bcs_phase_params_default(&p);
    p.n = n;
    p.L = L;
    p.k = k;
    p.count = count;
    if (!fractions.empty()) {
      p.fractions = fractions.data();
      p.num_fractions = static_cast<int64_t>(fractions.size());
    }
    p.trials = trials;
    p.threshold_db = threshold;
    p.seed = g.seed;
    p.threads = g.threads;
    auto chosen = [&](const char* key) { return learner.values.count(key) > 0 || g.file.count(key) > 0; };
    p.size_learner = chosen("r") || chosen("k_max") ? 0 : 1;
    const auto cfg = make_learner_config(g, learner, {{"max_outer_iters", "50"}, {"restarts", "3"}});
    bcs_phase_result* raw = nullptr;
    if (image.empty()) {
      check(bcs_phase_run(&p, cfg.get(), &raw));
    } else {
      bcs_image* img_raw = nullptr;
      check(bcs_image_load(image.c_str(), &img_raw));
      const Image img(img_raw);
      check(bcs_phase_run_image(&p, cfg.get(), img.get(), patch, nullptr, &raw));
    }
    const Phase r(raw);
    check(bcs_phase_write(r.get(), out_path(g, "phase_trials.csv").c_str(), out_path(g, "phase_summary.csv").c_str(),
                          out_path(g, "phase.dat").c_str()));
    std::cout << "fraction,frequency\n";
    for (int64_t i = 0; i < bcs_phase_rows(r.get()); ++i)
      std::cout << bcs_phase_fraction(r.get(), i) << "," << bcs_phase_frequency(r.get(), i) << "\n";
    return 0;
  }
};

struct CheckCmd {
  SensingFlags sensing;
  std::string dictionary;
  std::string checkpoint;
  std::int64_t max_subset = 6;
  double beta = 2.0;

  int run(const Global& g) {
    sensing.validate();
    const Matrix signals = load_matrix(sensing.signals);
    const auto ms = load_measurements(g, signals, sensing.masks, sensing.fraction, sensing.sensing);
    bcs_state* raw = nullptr;
    if (!checkpoint.empty())
      check(bcs_state_load_checkpoint(checkpoint.c_str(), &raw));
    else
      check(bcs_state_from_dictionary(ms.get(), dictionary.c_str(), &raw));
    const State st(raw);
    report_warnings(st.get());
    bcs_check_params p;
    bcs_check_params_default(&p);
    p.max_subset = max_subset;
    p.beta = beta;
    p.seed = g.seed;
    OwnedString json;
    int overall = 0;
    check(bcs_check_conditions(ms.get(), st.get(), &p, &json.s, &overall));
    write_text(out_path(g, "conditions.json"), json.str());
    std::cout << json.str() << "\n";
    log(Level::kInfo, overall ? "all conditions hold" : "some conditions fail or are unverified");
    return 0;
  }
};

struct CompleteCmd {
  std::string input;
  bool example = false;
  std::int64_t rows = 60, cols = 200, rank = 2;
  double fraction = 0.4;
  double tau = 0.0, delta = 0.0;
  int iters = 2000;
  double tol = 1e-6;
  std::string union_rows;
  std::int64_t k = 0;

  int run(const Global& g) {
    Observation obs;
    Matrix truth;
    if (example) {
      bcs_observation* o = nullptr;
      bcs_matrix* t = nullptr;
      check(bcs_observation_low_rank_example(rows, cols, rank, fraction, g.seed, &o, &t));
      obs.reset(o);
      truth.reset(t);
      check(bcs_observation_save(obs.get(), out_path(g, "observed.txt").c_str()));
    } else {
      bcs_observation* o = nullptr;
      check(bcs_observation_load(input.c_str(), &o));
      obs.reset(o);
    }
    bcs_svt_params p;
    bcs_svt_params_default(&p);
    p.tau = tau;
    p.delta = delta;
    p.max_iters = iters;
    p.tol = tol;
    bcs_matrix* y = nullptr;
    int iterations = 0;
    double residual = 0.0;
    check(bcs_svt_complete(obs.get(), &p, &y, &iterations, &residual));
    const Matrix completed(y);
    check(bcs_matrix_save(completed.get(), out_path(g, "completed.bin").c_str()));

    nlohmann::ordered_json j;
    j["rows"] = bcs_observation_rows(obs.get());
    j["cols"] = bcs_observation_cols(obs.get());
    j["observed"] = bcs_observation_count(obs.get());
    j["iterations"] = iterations;
    j["residual"] = residual;
    j["converged"] = residual < tol;
    if (truth) {
      const double* a = bcs_matrix_data(truth.get());
      const double* b = bcs_matrix_data(completed.get());
      const int64_t size = bcs_matrix_rows(truth.get()) * bcs_matrix_cols(truth.get());
      double num = 0.0, den = 0.0;
      for (int64_t i = 0; i < size; ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += a[i] * a[i];
      }
      j["relative_error"] = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    }
    if (!union_rows.empty()) {
      const Matrix uni = load_matrix(union_rows);
      bcs_matrix *d = nullptr, *s = nullptr;
      double fres = 0.0;
      check(bcs_factor_completed(completed.get(), uni.get(), k, &d, &s, &fres));
      const Matrix dm(d), sm(s);
      check(bcs_matrix_save(dm.get(), out_path(g, "factor_d.bin").c_str()));
      check(bcs_matrix_save(sm.get(), out_path(g, "factor_s.bin").c_str()));
      j["factor_residual"] = fres;
    }
    write_text(out_path(g, "metrics.json"), j.dump(2));
    std::cout << j.dump(2) << "\n";
    return 0;
  }
};

struct InpaintCmd {
  std::string image;
  std::string mask;
  std::optional<double> fraction;
  std::string reference;
  std::string output = "inpainted.png";
  std::string method = "als";
  std::int64_t patch = 8;
  bool keep_observed = false;
  double svt_tau = 0.0, svt_delta = 0.0;
  int svt_iters = 500;
  double svt_tol = 1e-4;
  LearnerFlags learner;

  int run(const Global& g) {
    if (mask.empty() && !fraction) usage_error("one of --mask or --fraction is required");
    bcs_image* raw = nullptr;
    check(bcs_image_load(image.c_str(), &raw));
    const Image input(raw);
    bcs_image* obs_raw = nullptr;
    if (fraction)
      check(bcs_image_mask_random(input.get(), *fraction, g.seed, &obs_raw));
    else
      check(bcs_image_mask_file(input.get(), mask.c_str(), &obs_raw));
    const Image observed(obs_raw);
    Image ref;
    if (!reference.empty()) {
      bcs_image* r = nullptr;
      check(bcs_image_load(reference.c_str(), &r));
      ref.reset(r);
    }
    // With a generated mask the input itself is the ground truth.
    const bcs_image* original = ref ? ref.get() : (fraction ? input.get() : nullptr);

    bcs_inpaint_params p;
    bcs_inpaint_params_default(&p);
    p.patch = patch;
    p.method = method == "svt" ? BCS_INPAINT_SVT : BCS_INPAINT_ALS;
    p.keep_observed = keep_observed ? 1 : 0;
    p.svt_tau = svt_tau;
    p.svt_delta = svt_delta;
    p.svt_max_iters = svt_iters;
    p.svt_tol = svt_tol;
    p.threads = g.threads;
    const auto cfg = make_learner_config(g, learner);
    bcs_inpaint_result* res_raw = nullptr;
    check(bcs_inpaint(observed.get(), cfg.get(), &p, progress, nullptr, &res_raw));
    const InpaintResult res(res_raw);
    report_warnings(bcs_inpaint_state(res.get()));

    check(bcs_image_save(bcs_inpaint_image(res.get()), out_path(g, output).c_str()));
    check(bcs_image_save_mask(observed.get(), out_path(g, "mask.pbm").c_str()));
    check(bcs_state_save_dictionary(bcs_inpaint_state(res.get()), out_path(g, "dictionary.bin").c_str()));
    check(bcs_state_write_trace_csv(bcs_inpaint_state(res.get()), out_path(g, "trace.csv").c_str()));
    OwnedString json;
    check(bcs_inpaint_metrics_json(res.get(), original, observed.get(), &json.s));
    write_text(out_path(g, "metrics.json"), json.str());
    std::cout << json.str() << "\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind compressed sensing over a union of subspaces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bcs_version());
  Global g;
  app.add_option("--seed", g.seed, "random seed (default 0)");
  app.add_option("--threads", g.threads, "worker threads (default 1)")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", g.output_dir, "directory for output files (default .)");
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  auto* config_opt = app.add_option("--config", g.config, "flat key=value file; flags override it")
                         ->check(CLI::ExistingFile);

  LearnCmd learn;
  auto* learn_app = app.add_subcommand("learn", "learn a block dictionary from compressive measurements");
  learn.sensing.attach(learn_app);
  learn.learner.attach(learn_app);
  learn_app->add_option("--resume", learn.resume, "checkpoint directory to continue from")
      ->check(CLI::ExistingDirectory);

  SynthCmd synth;
  auto* synth_app = app.add_subcommand("synth", "generate planted union-of-subspaces data");
  synth_app->add_option("--n", synth.n, "signal dimension");
  synth_app->add_option("--blocks", synth.L, "number of subspaces");
  synth_app->add_option("--k", synth.k, "subspace dimension");
  synth_app->add_option("--count", synth.count, "signals per subspace");
  synth_app->add_option("--fraction", synth.fraction, "observed fraction for masks.txt")->check(CLI::Range(0.0, 1.0));
  synth_app->add_option("--sensing", synth.sensing, "pixel writes masks.txt; none skips it")
      ->check(CLI::IsMember({"pixel", "none"}));

  PhaseCmd phase;
  auto* phase_app = app.add_subcommand("phase", "success frequency against observed fraction");
  phase_app->add_option("--n", phase.n, "signal dimension");
  phase_app->add_option("--blocks", phase.L, "number of subspaces");
  phase_app->add_option("--k", phase.k, "subspace dimension");
  phase_app->add_option("--count", phase.count, "signals per subspace");
  phase_app->add_option("--fractions", phase.fractions, "observed fractions (default 0.1 ... 0.9)")
      ->check(CLI::Range(0.0, 1.0));
  phase_app->add_option("--trials", phase.trials, "trials per fraction")->check(CLI::PositiveNumber);
  phase_app->add_option("--threshold", phase.threshold, "success threshold in dB");
  phase_app->add_option("--image", phase.image, "use a rank-k truncation of this image instead of planted data");
  phase_app->add_option("--patch", phase.patch, "patch side with --image")->check(CLI::PositiveNumber);
  phase.learner.attach(phase_app, true);

  CheckCmd check_cmd;
  auto* check_app = app.add_subcommand("check-conditions", "check the uniqueness and sampling conditions");
  check_cmd.sensing.attach(check_app);
  auto* dict_opt = check_app->add_option("--dictionary", check_cmd.dictionary, "dictionary to assign signals with");
  auto* ckpt_opt = check_app->add_option("--checkpoint", check_cmd.checkpoint, "learner checkpoint directory")
                       ->check(CLI::ExistingDirectory);
  dict_opt->excludes(ckpt_opt);
  check_app->add_option("--max-subset", check_cmd.max_subset, "largest column subset in the spark search");
  check_app->add_option("--beta", check_cmd.beta, "constant in the observation count bound");

  CompleteCmd complete;
  auto* complete_app = app.add_subcommand("complete", "low-rank matrix completion by singular value thresholding");
  auto* in_opt = complete_app->add_option("--input", complete.input, "coordinate list 'u v value'")
                     ->check(CLI::ExistingFile);
  auto* ex_opt = complete_app->add_flag("--example", complete.example, "synthetic low-rank example");
  in_opt->excludes(ex_opt);
  complete_app->add_option("--rows", complete.rows, "example rows");
  complete_app->add_option("--cols", complete.cols, "example columns");
  complete_app->add_option("--rank", complete.rank, "example rank");
  complete_app->add_option("--fraction", complete.fraction, "example observed fraction")->check(CLI::Range(0.0, 1.0));
  complete_app->add_option("--tau", complete.tau, "threshold, 0 = 5 sqrt(rows cols)");
  complete_app->add_option("--delta", complete.delta, "step, 0 = 1.2 rows cols / observed");
  complete_app->add_option("--iters", complete.iters, "iteration cap")->check(CLI::PositiveNumber);
  complete_app->add_option("--tol", complete.tol, "relative residual to stop");
  auto* union_opt = complete_app->add_option("--union", complete.union_rows, "union sensing rows to factor with")
                        ->check(CLI::ExistingFile);
  complete_app->add_option("--k", complete.k, "factor rank")->needs(union_opt);

  InpaintCmd inpaint;
  auto* inpaint_app = app.add_subcommand("inpaint", "fill missing pixels of a grayscale image");
  inpaint_app->add_option("--image", inpaint.image, "PGM or PNG image")->required()->check(CLI::ExistingFile);
  auto* mask_opt = inpaint_app->add_option("--mask", inpaint.mask, "PBM (1 = observed) or index list")
                       ->check(CLI::ExistingFile);
  auto* frac_opt = inpaint_app->add_option("--fraction", inpaint.fraction, "observe this random fraction of pixels")
                       ->check(CLI::Range(0.0, 1.0));
  mask_opt->excludes(frac_opt);
  inpaint_app->add_option("--reference", inpaint.reference, "ground-truth image for PSNR")->check(CLI::ExistingFile);
  inpaint_app->add_option("-o,--output", inpaint.output, "output image name (.png or .pgm)");
  inpaint_app->add_option("--method", inpaint.method, "als or svt")->check(CLI::IsMember({"als", "svt"}));
  inpaint_app->add_option("--patch", inpaint.patch, "patch side (default 8)")->check(CLI::PositiveNumber);
  inpaint_app->add_flag("--keep-observed", inpaint.keep_observed, "copy observed pixels into the output");
  inpaint_app->add_option("--svt-tau", inpaint.svt_tau, "SVT threshold, 0 = standard");
  inpaint_app->add_option("--svt-delta", inpaint.svt_delta, "SVT step, 0 = standard");
  inpaint_app->add_option("--svt-iters", inpaint.svt_iters, "SVT iteration cap");
  inpaint_app->add_option("--svt-tol", inpaint.svt_tol, "SVT tolerance");
  inpaint.learner.attach(inpaint_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : BCS_ERR_CONTRACT;
  }

  try {
    if (*config_opt) {
      g.file = read_config(g.config);
      auto from_file = [&](const char* key, auto& target, const CLI::Option* flag) {
        const auto it = g.file.find(key);
        if (it == g.file.end() || (flag && flag->count() > 0)) return;
        std::istringstream in(it->second);
        in >> target;
        if (!in || !in.eof()) usage_error(std::string("config: bad value for ") + key);
      };
      from_file("seed", g.seed, app.get_option("--seed"));
      from_file("threads", g.threads, app.get_option("--threads"));
      from_file("output_dir", g.output_dir, app.get_option("--output-dir"));
      from_file("log_level", g.log_level, app.get_option("--log-level"));
    }
    g_level = g.log_level == "error" ? Level::kError
              : g.log_level == "warn" ? Level::kWarn
              : g.log_level == "debug" ? Level::kDebug
                                       : Level::kInfo;
    if (g.threads < 1) usage_error("--threads must be positive");
    std::error_code ec;
    fs::create_directories(g.output_dir, ec);
    if (ec) throw Failure{BCS_ERR_IO, "cannot create output directory '" + g.output_dir + "': " + ec.message()};

    if (*learn_app) return learn.run(g);
    if (*synth_app) return synth.run(g);
    if (*phase_app) return phase.run(g);
    if (*check_app) {
      if (check_cmd.dictionary.empty() && check_cmd.checkpoint.empty())
        usage_error("one of --dictionary or --checkpoint is required");
      return check_cmd.run(g);
    }
    if (*complete_app) {
      if (complete.input.empty() && !complete.example) usage_error("one of --input or --example is required");
      if (!complete.union_rows.empty() && complete.k <= 0) usage_error("--union needs a positive --k");
      return complete.run(g);
    }
    if (*inpaint_app) return inpaint.run(g);
  } catch (const Failure& f) {
    log(Level::kError, f.message);
    return f.status;
  } catch (const std::exception& e) {
    log(Level::kError, e.what());
    return BCS_ERR_INTERNAL;
  }
  return 0;
}
