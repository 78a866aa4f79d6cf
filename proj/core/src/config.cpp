#include "tcdesc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tcdesc/error.hpp"

namespace tcdesc {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::kInvalidArgument,
              "config: invalid value '" + value + "' for key '" + key + "'");
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, value);
  }
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::size_t> parse_widths(const std::string& key,
                                      const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, value);
    out.push_back(parse_uint(key, item));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "margin",      "k",           "lambda_n0",      "lambda_decay_steps",
      "lambda_decay_rate", "lambda_floor", "lambda_mode", "topology",
      "lle_eps",     "workers",     "hidden",         "output_dim",
      "batch_size",  "iterations",  "lr_start",       "lr_end",
      "momentum",    "weight_decay", "seed",          "data",
      "out",         "precision",   "holdout",        "log_every"};
  return keys;
}

RunConfig RunConfig::desk() {
  RunConfig cfg;
  cfg.loss.k = 8;
  cfg.loss.lambda_n0 = 400;
  cfg.loss.lambda_decay_steps = 80;
  cfg.loss.lambda_decay_rate = 0.025;
  cfg.loss.lambda_floor = 0.5;
  cfg.batch_size = 64;
  cfg.iterations = 2000;
  return cfg;
}

RunConfig RunConfig::paper() {
  RunConfig cfg;
  cfg.loss.k = 20;
  cfg.loss.lambda_n0 = 50000;
  cfg.loss.lambda_decay_steps = 10000;
  cfg.loss.lambda_decay_rate = 0.025;
  cfg.loss.lambda_floor = 0.5;
  cfg.batch_size = 1024;
  cfg.iterations = 250000;
  cfg.output_dim = 128;
  return cfg;
}

RunConfig RunConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw Error(ErrorKind::kInvalidArgument,
              "unknown preset '" + name + "' (expected desk or paper)");
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "margin") {
    loss.margin = parse_real(key, value);
  } else if (key == "k") {
    loss.k = parse_uint(key, value);
  } else if (key == "lambda_n0") {
    loss.lambda_n0 = parse_uint(key, value);
  } else if (key == "lambda_decay_steps") {
    loss.lambda_decay_steps = parse_uint(key, value);
  } else if (key == "lambda_decay_rate") {
    loss.lambda_decay_rate = parse_real(key, value);
  } else if (key == "lambda_floor") {
    loss.lambda_floor = parse_real(key, value);
  } else if (key == "lambda_mode") {
    if (value == "dynamic") {
      loss.fixed_lambda.reset();
    } else if (value.rfind("fixed:", 0) == 0) {
      loss.fixed_lambda = parse_real(key, value.substr(6));
    } else {
      bad_value(key, value);
    }
  } else if (key == "topology") {
    loss.topology_mode = parse_topology_mode(value);
  } else if (key == "lle_eps") {
    loss.lle_eps = parse_real(key, value);
  } else if (key == "workers") {
    loss.workers = parse_uint(key, value);
  } else if (key == "hidden") {
    hidden = value.empty() ? std::vector<std::size_t>{} : parse_widths(key, value);
  } else if (key == "output_dim") {
    output_dim = parse_uint(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_uint(key, value);
  } else if (key == "iterations") {
    iterations = parse_uint(key, value);
  } else if (key == "lr_start") {
    lr_start = parse_real(key, value);
  } else if (key == "lr_end") {
    lr_end = parse_real(key, value);
  } else if (key == "momentum") {
    momentum = parse_real(key, value);
  } else if (key == "weight_decay") {
    weight_decay = parse_real(key, value);
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "data") {
    data = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "precision") {
    if (value == "single") {
      precision = Precision::kSingle;
    } else if (value == "double") {
      precision = Precision::kDouble;
    } else {
      bad_value(key, value);
    }
  } else if (key == "holdout") {
    holdout = parse_real(key, value);
  } else if (key == "log_every") {
    log_every = parse_uint(key, value);
  } else {
    throw Error(ErrorKind::kInvalidArgument, "config: unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::string widths;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i > 0) widths += ",";
    widths += std::to_string(hidden[i]);
  }
  return {
      {"margin", format_real(loss.margin)},
      {"k", std::to_string(loss.k)},
      {"lambda_n0", std::to_string(loss.lambda_n0)},
      {"lambda_decay_steps", std::to_string(loss.lambda_decay_steps)},
      {"lambda_decay_rate", format_real(loss.lambda_decay_rate)},
      {"lambda_floor", format_real(loss.lambda_floor)},
      {"lambda_mode", loss.fixed_lambda
                          ? "fixed:" + format_real(*loss.fixed_lambda)
                          : std::string("dynamic")},
      {"topology", to_string(loss.topology_mode)},
      {"lle_eps", format_real(loss.lle_eps)},
      {"workers", std::to_string(loss.workers)},
      {"hidden", widths},
      {"output_dim", std::to_string(output_dim)},
      {"batch_size", std::to_string(batch_size)},
      {"iterations", std::to_string(iterations)},
      {"lr_start", format_real(lr_start)},
      {"lr_end", format_real(lr_end)},
      {"momentum", format_real(momentum)},
      {"weight_decay", format_real(weight_decay)},
      {"seed", std::to_string(seed)},
      {"data", data},
      {"out", out},
      {"precision", precision == Precision::kSingle ? "single" : "double"},
      {"holdout", format_real(holdout)},
      {"log_every", std::to_string(log_every)},
  };
}

std::string RunConfig::to_text() const {
  std::string text;
  for (const auto& [key, value] : entries()) {
    text += key + " = " + value + "\n";
  }
  return text;
}

void RunConfig::validate() const {
  loss.validate();
  const auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidArgument, "config: " + what);
  };
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (loss.topology_mode != TopologyMode::kOff && loss.k > batch_size - 1) {
    fail("k must be at most batch_size - 1");
  }
  if (output_dim < 1) fail("output_dim must be >= 1");
  if (std::find(hidden.begin(), hidden.end(), std::size_t{0}) != hidden.end()) {
    fail("hidden widths must be >= 1");
  }
  if (!(lr_start >= 0.0) || !(lr_end >= 0.0)) fail("learning rates must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(holdout >= 0.0 && holdout < 1.0)) fail("holdout must be in [0, 1)");
  if (log_every < 1) fail("log_every must be >= 1");
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument,
                  "config: line " + std::to_string(line_no) +
                      " is not of the form key = value");
    }
    cfg.set(trim(body.substr(0, eq)), body.substr(eq + 1));
  }
}

void load_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(cfg, buffer.str());
}

}  // namespace tcdesc
