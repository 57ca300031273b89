#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "ptmf/ablation.hpp"
#include "ptmf/config.hpp"
#include "ptmf/data_io.hpp"
#include "ptmf/dsp.hpp"
#include "ptmf/errors.hpp"
#include "ptmf/gradcheck_suite.hpp"
#include "ptmf/model.hpp"
#include "ptmf/train.hpp"

namespace ptmf::cli {

namespace fs = std::filesystem;

namespace {

// Path of the key=value file stored next to a checkpoint.
fs::path config_sidecar(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".config";
  return p;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

// Model-config flags shared by train and ablate. A flag only overrides the
// config file when it was given on the command line.
struct ConfigFlags {
  ModelConfig defaults;
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::pair<CLI::Option*, std::string>> keyed;
  bool no_multi_audio = false, no_co_att = false, no_multi_visual = false, no_ptmfim = false;

  std::string task = std::string(io::task_name(defaults.task));
  std::size_t epochs = defaults.epochs;
  std::size_t batch_size = defaults.batch_size;
  double lr = defaults.lr;
  double dropout = defaults.dropout;
  double val_fraction = defaults.val_fraction;
  std::uint64_t seed = defaults.seed;

  void add_to(CLI::App* app, bool with_ablation) {
    app->add_option("--config", config_path, "key = value file applied over the built-in defaults (default: none)");
    keyed.emplace_back(app->add_option("--task", task, "binary, ternary or quinary")->capture_default_str(),
                       "task");
    keyed.emplace_back(app->add_option("--epochs", epochs, "training epochs")->capture_default_str(),
                       "epochs");
    keyed.emplace_back(app->add_option("--batch-size", batch_size, "samples per step")->capture_default_str(),
                       "batch_size");
    keyed.emplace_back(app->add_option("--lr", lr, "Adam learning rate")->capture_default_str(), "lr");
    keyed.emplace_back(app->add_option("--dropout", dropout, "dropout rate")->capture_default_str(),
                       "dropout");
    keyed.emplace_back(
        app->add_option("--val-fraction", val_fraction, "stratified validation share")->capture_default_str(),
        "val_fraction");
    keyed.emplace_back(app->add_option("--seed", seed, "initialisation and sampling seed")->capture_default_str(),
                       "seed");
    app->add_option("--set", overrides, "extra config entries as key=value (repeatable)");
    if (with_ablation) {
      app->add_flag("--no-multi-audio", no_multi_audio, "Wav2Vec stream only (default: off)");
      app->add_flag("--no-co-att", no_co_att, "concatenate audio streams without weighting (default: off)");
      app->add_flag("--no-multi-visual", no_multi_visual, "OpenFace stream only (default: off)");
      app->add_flag("--no-ptmfim", no_ptmfim, "concatenate personality with f* instead (default: off)");
    }
  }

  ModelConfig resolve() const {
    ModelConfig cfg;
    if (!config_path.empty()) apply_kv_file(cfg, config_path);
    for (const auto& [opt, key] : keyed) {
      if (opt->count() > 0) cfg.set(key, opt->results().back());
    }
    for (const auto& entry : overrides) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + entry + "'");
      cfg.set(entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (no_multi_audio) cfg.ablation.multi_audio = false;
    if (no_co_att) cfg.ablation.co_att = false;
    if (no_multi_visual) cfg.ablation.multi_visual = false;
    if (no_ptmfim) cfg.ablation.ptmfim = false;
    cfg.validate();
    return cfg;
  }
};

void echo_config(std::ostream& err, const std::string& title, const std::string& body) {
  err << "# " << title << '\n' << body;
  if (!body.empty() && body.back() != '\n') err << '\n';
  err.flush();
}

std::vector<SampleTensors> load_data(const fs::path& manifest, const ModelConfig& cfg) {
  const auto records = io::load_manifest(manifest);
  if (records.empty()) throw ValidationError(manifest.string() + ": manifest has no records");
  return load_samples(records, cfg);
}

// ---- subcommands ----------------------------------------------------------

struct ExtractArgs {
  std::vector<std::string> wavs;
  std::string out_dir = ".";
  std::string features = "both";
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  dsp::MelConfig mel;
  std::string window = "hamming";
};

int do_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  dsp::Window window = dsp::Window::kHamming;
  if (a.window == "hann") window = dsp::Window::kHann;
  else if (a.window == "rectangular") window = dsp::Window::kRectangular;
  else if (a.window != "hamming") throw ValidationError("unknown window '" + a.window + "'");
  const bool want_lld = a.features == "lld" || a.features == "both";
  const bool want_mfcc = a.features == "mfcc" || a.features == "both";
  if (!want_lld && !want_mfcc) throw ValidationError("--features must be mfcc, lld or both");
  std::ostringstream text;
  text << "features = " << a.features << "\nframe_ms = " << a.frame_ms << "\nhop_ms = " << a.hop_ms
       << "\nwindow = " << a.window << "\nn_fft = " << a.mel.n_fft << "\nn_mels = " << a.mel.n_mels
       << "\nn_mfcc = " << a.mel.n_mfcc << "\nfmin = " << a.mel.fmin << "\nfmax = " << a.mel.fmax
       << "\nout_dir = " << a.out_dir << '\n';
  echo_config(err, "extract", text.str());

  fs::create_directories(a.out_dir);
  for (const auto& wav_path : a.wavs) {
    const dsp::Waveform w = dsp::read_wav(wav_path);
    const auto frames = dsp::FrameConfig::from_ms(a.frame_ms, a.hop_ms, w.sample_rate, window);
    const std::string stem = fs::path(wav_path).stem().string();
    if (want_lld) {
      const fs::path lld = fs::path(a.out_dir) / (stem + "_lld.mpft");
      io::write_feature_file(dsp::extract_lld_bundle(w, frames), lld);
      out << lld.string() << '\n';
    }
    if (want_mfcc) {
      const fs::path mfcc = fs::path(a.out_dir) / (stem + "_mfcc.mpft");
      io::write_feature_file(dsp::mfcc(w, frames, a.mel), mfcc);
      out << mfcc.string() << '\n';
    }
  }
  return kOk;
}

struct SynthArgs {
  std::string config_path;
  io::SynthSpec spec;
  std::string task = "binary";
  std::string out_dir;
};

int do_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  if (!a.config_path.empty()) apply_kv_file(cfg, a.config_path);
  io::SynthSpec spec = a.spec;
  spec.task = io::parse_task(a.task);
  spec.dims = cfg.dims;
  spec.personality_dim = cfg.personality_dim;
  std::ostringstream text;
  text << std::setprecision(17) << "n = " << spec.n_samples << "\ntask = " << a.task
       << "\nclass_sep = " << spec.class_sep << "\npersonality_sep = " << spec.personality_sep
       << "\nt_min = " << spec.t_min << "\nt_max = " << spec.t_max << "\nseed = " << spec.seed
       << "\nout_dir = " << a.out_dir << '\n';
  for (const auto& [k, v] : cfg.to_kv()) {
    if (k.ends_with("_dim")) text << k << " = " << v << '\n';
  }
  echo_config(err, "synth", text.str());
  const auto records = io::synth_dataset(spec, a.out_dir);
  out << (fs::path(a.out_dir) / "manifest.jsonl").string() << '\n';
  err << "wrote " << records.size() << " samples\n";
  return kOk;
}

struct TrainArgs {
  ConfigFlags flags;
  std::string manifest;
  std::string checkpoint = "model.ckpt";
  std::string log_path;
};

int do_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const ModelConfig cfg = a.flags.resolve();
  echo_config(err, "train", cfg.to_text());
  const auto samples = load_data(a.manifest, cfg);

  DepressionNet net(cfg);
  TrainReport report;
  if (a.log_path.empty()) {
    report = train(net, samples, &out);
  } else {
    std::ofstream log = open_output(a.log_path);
    report = train(net, samples, &log);
  }
  const fs::path ckpt = a.checkpoint;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  write_checkpoint(ckpt, net.params().params());
  write_config_file(cfg, config_sidecar(ckpt));
  err << "selected epoch " << report.best_epoch << "; checkpoint " << ckpt.string() << '\n';
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string task;
  std::string model_config;
  std::string out_path;
};

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  const fs::path cfg_path = a.model_config.empty() ? config_sidecar(a.checkpoint) : fs::path(a.model_config);
  apply_kv_file(cfg, cfg_path);
  cfg.validate();
  if (!a.task.empty() && io::parse_task(a.task) != cfg.task) {
    throw ValidationError("checkpoint " + a.checkpoint + " was trained for the " +
                          std::string(io::task_name(cfg.task)) + " task (" +
                          std::to_string(cfg.n_classes()) + " classes) but --task is " + a.task +
                          " (" + std::to_string(io::num_classes(io::parse_task(a.task))) + " classes)");
  }
  echo_config(err, "eval", cfg.to_text());

  DepressionNet net(cfg);
  load_checkpoint_into(net.params(), read_checkpoint(a.checkpoint));
  const auto samples = load_data(a.manifest, cfg);
  const MetricsReport report = evaluate(net, samples);
  if (a.out_path.empty()) {
    out << report.to_json() << '\n';
  } else {
    open_output(a.out_path) << report.to_json() << '\n';
  }
  return kOk;
}

struct AblateArgs {
  ConfigFlags flags;
  std::string manifest;
  std::vector<std::string> tasks{"binary", "ternary", "quinary"};
  std::string out_path;
};

int do_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const ModelConfig cfg = a.flags.resolve();
  std::vector<io::Task> tasks;
  for (const auto& t : a.tasks) tasks.push_back(io::parse_task(t));
  echo_config(err, "ablate", cfg.to_text());
  const auto samples = load_data(a.manifest, cfg);
  const auto rows = run_ablation(cfg, samples, tasks);
  const std::string csv = ablation_csv(rows);
  if (a.out_path.empty()) {
    out << csv;
  } else {
    open_output(a.out_path) << csv;
  }
  return kOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 1;
  GradCheckOptions options;
};

int do_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  std::ostringstream text;
  text << std::setprecision(17) << "seed = " << a.seed << "\neps = " << a.options.eps
       << "\nfloor = " << a.options.floor << "\ntolerance = " << a.options.tolerance << "\nmax_elements = " << a.options.max_elements << '\n';
  echo_config(err, "gradcheck", text.str());
  GradCheckOptions opt = a.options;
  opt.seed = a.seed;
  const auto results = run_gradcheck_suite(a.seed, opt);

  bool ok = true;
  double worst = 0.0;
  out << "module\tparameter\tchecked\tmax_rel_error\n";
  out << std::scientific << std::setprecision(3);
  for (const auto& r : results) {
    for (const auto& e : r.report.entries) {
      out << r.module << '\t' << e.name << '\t' << e.checked << '\t' << e.max_rel_error << '\n';
    }
    worst = std::max(worst, r.report.max_rel_error());
    ok = ok && r.report.passed();
  }
  err << (ok ? "gradcheck passed" : "gradcheck FAILED") << "; max relative error " << worst << '\n';
  return ok ? kOk : kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personality-aware multimodal depression detection toolkit", "ptmf"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "LLD and MFCC features from 16-bit PCM WAV files");
  extract->add_option("--wav", ex.wavs, "input WAV file (repeatable)")->required();
  extract->add_option("--out-dir", ex.out_dir, "output directory");
  extract->add_option("--features", ex.features, "mfcc, lld or both");
  extract->add_option("--frame-ms", ex.frame_ms, "frame length in milliseconds");
  extract->add_option("--hop-ms", ex.hop_ms, "hop length in milliseconds");
  extract->add_option("--window", ex.window, "hamming, hann or rectangular");
  extract->add_option("--n-fft", ex.mel.n_fft, "FFT size (power of two)");
  extract->add_option("--n-mels", ex.mel.n_mels, "mel filters");
  extract->add_option("--n-mfcc", ex.mel.n_mfcc, "cepstral coefficients kept");
  extract->add_option("--fmin", ex.mel.fmin, "lowest filterbank frequency (Hz)");
  extract->add_option("--fmax", ex.mel.fmax, "highest filterbank frequency (Hz), 0 = Nyquist");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and manifest");
  synth->add_option("--config", sy.config_path, "key = value file for stream and personality dims (default: none)");
  synth->add_option("--n", sy.spec.n_samples, "number of subjects");
  synth->add_option("--task", sy.task, "task whose classes are balanced");
  synth->add_option("--class-sep", sy.spec.class_sep, "class mean offset in noise std units");
  synth->add_option("--personality-sep", sy.spec.personality_sep,
                    "personality embedding class offset, negative = class-sep");
  synth->add_option("--t-min", sy.spec.t_min, "minimum frames per stream");
  synth->add_option("--t-max", sy.spec.t_max, "maximum frames per stream");
  synth->add_option("--seed", sy.spec.seed, "generator seed");
  synth->add_option("--out-dir", sy.out_dir, "output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model; epoch log as JSON lines");
  tr.flags.add_to(train_cmd, true);
  train_cmd->add_option("--manifest", tr.manifest, "JSON-lines manifest")->required();
  train_cmd->add_option("--out", tr.checkpoint, "checkpoint path (config saved alongside as <path>.config)");
  train_cmd->add_option("--log", tr.log_path, "epoch log file (default: standard output)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint; metrics JSON");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "JSON-lines manifest")->required();
  eval_cmd->add_option("--task", ev.task, "expected task; must match the checkpoint (default: checkpoint's)");
  eval_cmd->add_option("--model-config", ev.model_config, "model config (default: <checkpoint>.config)");
  eval_cmd->add_option("--out", ev.out_path, "metrics file (default: standard output)");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "train every ablation variant on every task; CSV table");
  ab.flags.add_to(ablate, false);
  ablate->add_option("--manifest", ab.manifest, "JSON-lines manifest")->required();
  ablate->add_option("--tasks", ab.tasks, "tasks to run");
  ablate->add_option("--out", ab.out_path, "CSV file (default: standard output)");

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every module");
  gradcheck->add_option("--seed", gc.seed, "seed for sizes, inputs and weights");
  gradcheck->add_option("--eps", gc.options.eps, "central-difference step");
  gradcheck->add_option("--floor", gc.options.floor, "relative-error denominator floor");
  gradcheck->add_option("--tolerance", gc.options.tolerance, "maximum relative error");
  gradcheck->add_option("--max-elements", gc.options.max_elements, "elements checked per parameter, 0 = all");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*extract) return do_extract(ex, out, err);
    if (*synth) return do_synth(sy, out, err);
    if (*train_cmd) return do_train(tr, out, err);
    if (*eval_cmd) return do_eval(ev, out, err);
    if (*ablate) return do_ablate(ab, out, err);
    if (*gradcheck) return do_gradcheck(gc, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kValidation;
}

}  // namespace ptmf::cli
