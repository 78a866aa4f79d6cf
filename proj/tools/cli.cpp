#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "tcdesc/config.hpp"
#include "tcdesc/data.hpp"
#include "tcdesc/error.hpp"
#include "tcdesc/eval.hpp"
#include "tcdesc/knn.hpp"
#include "tcdesc/loss.hpp"
#include "tcdesc/net.hpp"
#include "tcdesc/train.hpp"

namespace tcdesc::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kSeedEnv = "TCDESC_SEED";
constexpr const char* kModelFile = "model.tcd";
constexpr const char* kLogFile = "train_log.csv";
constexpr const char* kEffectiveConfigFile = "effective_config.txt";

// Raised for command-level usage problems detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kInvalidBatch:
      return kExitUsage;
    case ErrorKind::kFormat:
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kDivergence:
    case ErrorKind::kSingularSystem:
    case ErrorKind::kDegenerateFit:
    case ErrorKind::kDegenerateDescriptor:
      return kExitDivergence;
  }
  return kExitUsage;
}

// --seed wins, then $TCDESC_SEED, then the fallback.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') {
      throw UsageError(std::string(kSeedEnv) + " is not an unsigned integer");
    }
    return v;
  }
  return fallback;
}

std::string real(double v, int precision = 17) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw UsageError("--data is required");
  return read_dataset(path);
}

EmbeddingNet<double> load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  return read_checkpoint(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) {
    throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::optional<std::uint64_t> seed;
  std::size_t scenes = 512;
  std::size_t dim = 16;
  double noise = 0.05;
  double distortion = 0.3;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  GeneratorParams params;
  params.seed = resolve_seed(a.seed, 0);
  params.scenes = a.scenes;
  params.dim = a.dim;
  params.noise_sigma = a.noise;
  params.distortion = a.distortion;
  const Dataset ds = generate(params);
  try {
    write_dataset(a.out, ds);
  } catch (const Error& e) {
    // An unwritable destination is a usage problem for this command.
    throw UsageError(e.what());
  }
  out << "wrote " << a.out << ": TCPD v" << ds.header.version << ", "
      << ds.header.scene_count << " scenes, dim " << ds.header.dim << ", seed "
      << ds.header.seed << ", noise " << ds.header.noise_sigma
      << ", distortion " << ds.header.distortion << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string preset = "desk";
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

std::string train_help(const std::string& key) {
  static const std::map<std::string, std::string> help = {
      {"margin", "Triplet margin"},
      {"k", "Neighbors per descriptor for the topology term"},
      {"lambda_n0", "Iterations before lambda starts to decay"},
      {"lambda_decay_steps", "Iterations per lambda decrement"},
      {"lambda_decay_rate", "Lambda decrement per step"},
      {"lambda_floor", "Lower bound on lambda"},
      {"lambda_mode", "dynamic or fixed:<value>"},
      {"topology", "through-weights, detached or off"},
      {"lle_eps", "Relative conditioning of the weight solve"},
      {"workers", "Threads for neighbor search and weight fits"},
      {"hidden", "Comma-separated hidden widths"},
      {"output_dim", "Descriptor dimension"},
      {"batch_size", "Matching pairs per batch"},
      {"iterations", "Training iterations"},
      {"lr_start", "Initial learning rate"},
      {"lr_end", "Final learning rate (linear schedule)"},
      {"momentum", "SGD momentum"},
      {"weight_decay", "L2 weight decay"},
      {"seed", "Initialization and sampling seed (falls back to $TCDESC_SEED)"},
      {"data", "TCPD dataset"},
      {"out", "Output directory"},
      {"precision", "single or double"},
      {"holdout", "Trailing fraction of scenes kept out of training"},
      {"log_every", "Log every N iterations"},
  };
  const auto it = help.find(key);
  return it == help.end() ? std::string() : it->second;
}

RunConfig resolve_run_config(const TrainArgs& a) {
  RunConfig cfg = RunConfig::preset(a.preset);
  if (!a.config_file.empty()) load_config_file(a.config_file, cfg);
  for (const auto& key : config_keys()) {
    const auto opt = a.options.find(key);
    if (opt != a.options.end() && opt->second->count() > 0) {
      cfg.set(key, a.values.at(key));
    }
  }
  if (a.options.at("seed")->count() == 0) {
    const char* env = std::getenv(kSeedEnv);
    if (env != nullptr && *env != '\0') cfg.set("seed", env);
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_run_config(a);
  if (cfg.out.empty()) throw UsageError("--out (output directory) is required");
  const Dataset full = load_dataset(cfg.data);
  const auto [train_split, held_out] = split_holdout(full, cfg.holdout);

  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create output directory '" + cfg.out +
                                    "': " + ec.message());
  }
  const fs::path dir(cfg.out);
  write_text(dir / kEffectiveConfigFile, cfg.to_text());

  std::ofstream log(dir / kLogFile, std::ios::trunc);
  if (!log) throw Error(ErrorKind::kIo, "cannot write training log");
  log << train_log_header() << "\n";

  const std::uint64_t progress_every = std::max<std::uint64_t>(1, cfg.iterations / 10);
  TrainResult result;
  try {
    result = train(train_split, cfg, [&](const TrainLogRow& row) {
      log << format_train_log_row(row) << "\n";
      if (row.iteration % progress_every == 0) {
        out << "iter " << row.iteration << " lambda " << real(row.report.lambda, 4)
            << " loss " << real(row.report.loss, 6) << " d_pos "
            << real(row.report.mean_d_pos_euclid, 4) << " d_T "
            << real(row.report.mean_d_pos_topo, 4) << " d_neg "
            << real(row.report.mean_d_neg, 4) << "\n";
      }
    });
  } catch (const Error& e) {
    log.flush();
    if (e.kind() == ErrorKind::kDivergence) {
      err << "error: " << e.what() << "\n";
      return kExitDivergence;
    }
    throw;
  }
  log.flush();
  write_checkpoint(dir / kModelFile, result.net);
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    out << "done: " << cfg.iterations << " iterations, final loss "
        << real(last.report.loss, 6) << ", checkpoint " << (dir / kModelFile).string()
        << "\n";
  }
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  double holdout = 0.2;
  bool all = false;
  std::size_t negatives = 10;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const EmbeddingNet<double> net = load_model(a.model);
  const Dataset full = load_dataset(a.data);
  if (full.header.dim != net.input_dim()) {
    throw Error(ErrorKind::kFormat,
                "dataset dim " + std::to_string(full.header.dim) +
                    " does not match checkpoint input width " +
                    std::to_string(net.input_dim()));
  }
  const Dataset split = a.all ? full : split_holdout(full, a.holdout).second;
  if (split.records.size() < 2) {
    throw UsageError("evaluation split has fewer than 2 scenes");
  }
  const std::uint64_t seed = resolve_seed(a.seed, 0);
  const MetricReport r = evaluate_net(net, split, a.negatives, seed);
  out << "scenes   " << split.records.size() << "\n"
      << "n_pos    " << r.n_pos << "\n"
      << "n_neg    " << r.n_neg << "\n"
      << "fpr95    " << real(r.fpr95) << "\n"
      << "mAP      " << real(r.mean_average_precision) << "\n";
  if (!a.out.empty()) {
    write_text(a.out, "fpr95,mAP,n_pos,n_neg\n" + real(r.fpr95) + "," +
                          real(r.mean_average_precision) + "," +
                          std::to_string(r.n_pos) + "," +
                          std::to_string(r.n_neg) + "\n");
  }
  return kExitOk;
}

// ----------------------------------------------------------------- inspect

struct InspectArgs {
  std::string model;
  std::string data;
  std::size_t batch_size = 16;
  std::size_t k = 4;
  double lle_eps = kDefaultLleEps;
  std::optional<std::uint64_t> seed;
  std::string csv;
};

std::string topology_line(std::size_t index, const NeighborSet& nb,
                          const LleWeights& w) {
  std::string line = std::to_string(index) + ":";
  for (std::size_t r = 0; r < nb.neighbor_indices.size(); ++r) {
    line += " (" + std::to_string(nb.neighbor_indices[r]) + ":" +
            real(w.weights[r]) + ")";
  }
  return line;
}

std::string join_indices(const std::vector<std::size_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const EmbeddingNet<double> net = load_model(a.model);
  const Dataset ds = load_dataset(a.data);
  if (ds.header.dim != net.input_dim()) {
    throw Error(ErrorKind::kFormat,
                "dataset dim " + std::to_string(ds.header.dim) +
                    " does not match checkpoint input width " +
                    std::to_string(net.input_dim()));
  }
  std::mt19937_64 rng(resolve_seed(a.seed, 0));
  const PatchBatch batch = sample_batch(ds, a.batch_size, rng);
  const DenseMatrix anchors = embed(net, batch.anchors);
  const DenseMatrix positives = embed(net, batch.positives);
  const BatchTopology topo = batch_topology(anchors, positives, a.k, a.lle_eps);
  const std::size_t n = anchors.rows();

  out << "# batch n=" << n << " k=" << a.k << " scenes";
  for (const auto id : batch.scene_ids) out << " " << id;
  out << "\n[A neighbors]\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ": " << join_indices(topo.anchor_neighbors[i].neighbor_indices, ' ')
        << "\n";
  }
  out << "[A topology]\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << topology_line(i, topo.anchor_neighbors[i], topo.anchor_weights[i]) << "\n";
  }
  out << "[P neighbors]\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ": "
        << join_indices(topo.positive_neighbors[i].neighbor_indices, ' ') << "\n";
  }
  out << "[P topology]\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << topology_line(i, topo.positive_neighbors[i], topo.positive_weights[i])
        << "\n";
  }
  out << "[distances]\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_e = unit_distance(anchors.row(i), positives.row(i));
    const double d_t = topo.distance[i];
    out << i << " d_E=" << real(d_e) << " d_T=" << real(d_t);
    if (d_t > 1.0) {
      out << " FLAG d_T>1";
      ++flagged;
    }
    out << "\n";
  }
  out << "# pairs with d_T > 1: " << flagged << "\n";

  if (!a.csv.empty()) {
    std::string csv = "index,d_E,d_T,d_T_gt_1,a_neighbors,a_weights,p_neighbors,p_weights\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto weights = [](const std::vector<double>& w) {
        std::string s;
        for (std::size_t r = 0; r < w.size(); ++r) {
          if (r > 0) s += ';';
          s += real(w[r]);
        }
        return s;
      };
      csv += std::to_string(i) + "," +
             real(unit_distance(anchors.row(i), positives.row(i))) + "," +
             real(topo.distance[i]) + "," + (topo.distance[i] > 1.0 ? "1" : "0") +
             "," + join_indices(topo.anchor_neighbors[i].neighbor_indices, ';') +
             "," + weights(topo.anchor_weights[i].weights) + "," +
             join_indices(topo.positive_neighbors[i].neighbor_indices, ';') + "," +
             weights(topo.positive_weights[i].weights) + "\n";
    }
    write_text(a.csv, csv);
  }
  return kExitOk;
}

// --------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::optional<std::uint64_t> seed;
  std::string mode = "through-weights";
  double lambda = 0.5;
  double tol = 1e-4;
  double step = 1e-5;
  std::size_t batch = 6;
  std::size_t k = 2;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(a.seed, 0);
  LossConfig cfg;
  cfg.margin = 1.0;
  cfg.k = a.k;
  cfg.topology_mode = parse_topology_mode(a.mode);
  cfg.fixed_lambda = a.lambda;
  cfg.validate();

  const EmbeddingNet<double> net = EmbeddingNet<double>::create({8, 8, 4}, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix anchors(a.batch, 8);
  DenseMatrix positives(a.batch, 8);
  for (double& v : anchors.data()) v = normal(rng);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    positives.data()[i] = anchors.data()[i] + 0.3 * normal(rng);
  }
  ForwardOptions options;
  options.corrupt_activation_derivative = a.inject_fault;
  const GradCheckReport r =
      grad_check(net, anchors, positives, cfg, 0, a.step, seed, options);
  out << "mode                 " << a.mode << "\n"
      << "lambda               " << real(effective_lambda(0, cfg)) << "\n"
      << "parameters checked   " << r.checked_parameters << "\n"
      << "step                 " << real(r.step_size) << "\n"
      << "max relative error   " << real(r.max_relative_error, 6) << "\n"
      << "worst parameter      " << r.worst_parameter << "\n";
  if (!(r.max_relative_error < a.tol)) {
    err << "gradcheck failed: max relative error " << real(r.max_relative_error, 6)
        << " >= tol " << real(a.tol) << " at " << r.worst_parameter << "\n";
    return kExitCheckFailed;
  }
  out << "ok (tol " << real(a.tol) << ")\n";
  return kExitOk;
}

std::string flag_for(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"tcdesc: topology-consistent descriptor learning toolkit", "tcdesc"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic TCPD dataset");
  generate_cmd->add_option("--seed", gen.seed, "Generator seed (falls back to $TCDESC_SEED)");
  generate_cmd->add_option("--scenes", gen.scenes, "Number of scenes (>= 2)");
  generate_cmd->add_option("--dim", gen.dim, "Raw patch dimension");
  generate_cmd->add_option("--noise", gen.noise, "Per-view Gaussian noise sigma");
  generate_cmd->add_option("--distortion", gen.distortion, "Bound on |R - I| for the second view");
  generate_cmd->add_option("--out", gen.out, "Output file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train an embedding net");
  train_cmd->add_option("--preset", tr.preset, "desk (default) or paper");
  train_cmd->add_option("--config", tr.config_file, "key = value config file");
  for (const auto& key : config_keys()) {
    tr.options[key] = train_cmd->add_option(flag_for(key), tr.values[key], train_help(key));
  }

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on held-out scenes");
  eval_cmd->add_option("--model", ev.model, "TCD1 checkpoint");
  eval_cmd->add_option("--data", ev.data, "TCPD dataset");
  eval_cmd->add_option("--holdout", ev.holdout, "Held-out fraction used in training");
  eval_cmd->add_flag("--all", ev.all, "Evaluate every scene instead of the held-out split");
  eval_cmd->add_option("--negatives", ev.negatives, "Non-matching pairs per matching pair");
  eval_cmd->add_option("--seed", ev.seed, "Pair sampling seed");
  eval_cmd->add_option("--out", ev.out, "Write metrics as a CSV row");

  InspectArgs in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump neighbors and topology vectors for one batch");
  inspect_cmd->add_option("--model", in.model, "TCD1 checkpoint");
  inspect_cmd->add_option("--data", in.data, "TCPD dataset");
  inspect_cmd->add_option("--batch-size", in.batch_size, "Scenes in the batch");
  inspect_cmd->add_option("--k", in.k, "Neighbors per descriptor");
  inspect_cmd->add_option("--lle-eps", in.lle_eps, "Relative conditioning of the weight solve");
  inspect_cmd->add_option("--seed", in.seed, "Batch sampling seed");
  inspect_cmd->add_option("--csv", in.csv, "Also write a CSV dump");

  GradcheckArgs gc;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradient");
  gradcheck_cmd->add_option("--seed", gc.seed, "Net and batch seed");
  gradcheck_cmd->add_option("--mode", gc.mode, "through-weights, detached or off");
  gradcheck_cmd->add_option("--lambda", gc.lambda, "Fixed lambda");
  gradcheck_cmd->add_option("--tol", gc.tol, "Maximum relative error");
  gradcheck_cmd->add_option("--step", gc.step, "Central difference step");
  gradcheck_cmd->add_option("--batch", gc.batch, "Matching pairs in the batch");
  gradcheck_cmd->add_option("--k", gc.k, "Neighbors per descriptor");
  gradcheck_cmd->add_flag("--inject-fault", gc.inject_fault)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate_cmd) return cmd_generate(gen, out);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*inspect_cmd) return cmd_inspect(in, out);
    if (*gradcheck_cmd) return cmd_gradcheck(gc, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
  return kExitUsage;
}

}  // namespace tcdesc::cli
