#include "relrank/run_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <regex>
#include <sstream>

#include "relrank/error.hpp"

namespace relrank::io {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::reseed(std::uint64_t master) {
  seed = master;
  synth.seed = master;
  train.seed = master;
  loop.seed = master;
}

namespace {

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  reject_unknown(j, {"seed", "dataset", "synth", "split", "model", "train", "loop", "oracle_flip_probability", "port",
                     "run_id", "ui_dir"},
                 "configuration");
  RunConfig c;
  std::uint64_t master = 0;
  read_field(j, "seed", master);
  c.reseed(master);

  if (auto it = j.find("dataset"); it != j.end() && !it->is_null()) c.dataset = fs::path(it->get<std::string>());
  if (auto it = j.find("ui_dir"); it != j.end() && !it->is_null()) c.ui_dir = fs::path(it->get<std::string>());
  read_field(j, "oracle_flip_probability", c.oracle_flip_probability);
  read_field(j, "port", c.port);
  read_field(j, "run_id", c.run_id);

  if (auto it = j.find("split"); it != j.end()) {
    std::vector<double> f;
    read_field(j, "split", f);
    if (f.size() != 3) throw ConfigError("split must list three fractions");
    c.split = {f[0], f[1], f[2]};
  }
  if (auto it = j.find("synth"); it != j.end()) {
    const json& s = *it;
    reject_unknown(s, {"num_classes", "class_proportions", "n", "feature_dim", "informative_dims", "noise_scale",
                       "group_size", "seed"},
                   "synth");
    read_field(s, "num_classes", c.synth.num_classes);
    read_field(s, "class_proportions", c.synth.class_proportions);
    read_field(s, "n", c.synth.n);
    read_field(s, "feature_dim", c.synth.feature_dim);
    read_field(s, "informative_dims", c.synth.informative_dims);
    read_field(s, "noise_scale", c.synth.noise_scale);
    read_field(s, "group_size", c.synth.group_size);
    read_field(s, "seed", c.synth.seed);
  }
  if (auto it = j.find("model"); it != j.end()) {
    const json& m = *it;
    reject_unknown(m, {"hidden", "dropout_rate", "weight_decay"}, "model");
    read_field(m, "hidden", c.model.hidden);
    read_field(m, "dropout_rate", c.model.dropout_rate);
    read_field(m, "weight_decay", c.model.weight_decay);
  }
  if (auto it = j.find("train"); it != j.end()) {
    const json& t = *it;
    reject_unknown(t, {"batch_size", "epochs_per_round", "learning_rate", "multitask", "retrain_mode", "seed"}, "train");
    read_field(t, "batch_size", c.train.batch_size);
    read_field(t, "epochs_per_round", c.train.epochs_per_round);
    read_field(t, "learning_rate", c.train.learning_rate);
    read_field(t, "multitask", c.train.multitask);
    read_field(t, "seed", c.train.seed);
    std::string mode = "warm";
    read_field(t, "retrain_mode", mode);
    if (mode == "warm")
      c.train.retrain_mode = rank::RetrainMode::warm;
    else if (mode == "scratch")
      c.train.retrain_mode = rank::RetrainMode::scratch;
    else
      throw ConfigError("retrain_mode must be 'warm' or 'scratch'");
  }
  if (auto it = j.find("loop"); it != j.end()) {
    const json& l = *it;
    reject_unknown(l, {"r_percent", "s_percent", "K", "T", "sampler", "seed"}, "loop");
    read_field(l, "r_percent", c.loop.r_percent);
    read_field(l, "s_percent", c.loop.s_percent);
    read_field(l, "K", c.loop.rounds);
    read_field(l, "T", c.loop.draws);
    read_field(l, "seed", c.loop.seed);
    std::string sampler = active::to_string(c.loop.sampler);
    read_field(l, "sampler", sampler);
    c.loop.sampler = active::sampler_from_string(sampler);
  }
  c.loop.validate();
  c.train.validate();
  if (!c.dataset) c.synth.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset ? json(c.dataset->string()) : json(nullptr);
  j["synth"] = {{"num_classes", c.synth.num_classes},
                {"class_proportions", c.synth.class_proportions},
                {"n", c.synth.n},
                {"feature_dim", c.synth.feature_dim},
                {"informative_dims", c.synth.informative_dims},
                {"noise_scale", c.synth.noise_scale},
                {"group_size", c.synth.group_size},
                {"seed", c.synth.seed}};
  j["split"] = c.split;
  j["model"] = {{"hidden", c.model.hidden}, {"dropout_rate", c.model.dropout_rate},
                {"weight_decay", c.model.weight_decay}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs_per_round", c.train.epochs_per_round},
                {"learning_rate", c.train.learning_rate},
                {"multitask", c.train.multitask},
                {"retrain_mode", c.train.retrain_mode == rank::RetrainMode::warm ? "warm" : "scratch"},
                {"seed", c.train.seed}};
  j["loop"] = {{"r_percent", c.loop.r_percent}, {"s_percent", c.loop.s_percent},
               {"K", c.loop.rounds},            {"T", c.loop.draws},
               {"sampler", active::to_string(c.loop.sampler)}, {"seed", c.loop.seed}};
  j["oracle_flip_probability"] = c.oracle_flip_probability;
  j["port"] = c.port;
  j["run_id"] = c.run_id;
  j["ui_dir"] = c.ui_dir ? json(c.ui_dir->string()) : json(nullptr);
  return j;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// --- parameter snapshots ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'L', 'R', 'K'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("truncated parameter snapshot");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void save_params(const nn::NetworkParams& params, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(kMagic, 4);
  put_u64(out, kParamsFormatVersion);
  put_u64(out, params.layer_sizes.size());
  for (std::size_t s : params.layer_sizes) put_u64(out, s);
  put_f64(out, params.dropout_rate);
  put_f64(out, params.weight_decay);
  for (const nn::Layer& layer : params.layers) {
    for (double w : layer.weights) put_f64(out, w);
    for (double b : layer.bias) put_f64(out, b);
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

nn::NetworkParams load_params(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw IoError("not a parameter snapshot");
  if (get_u64(in) != kParamsFormatVersion) throw IoError("unsupported parameter snapshot version");
  const std::uint64_t count = get_u64(in);
  if (count < 2 || count > 64) throw IoError("corrupt parameter snapshot");
  nn::NetworkParams params;
  for (std::uint64_t k = 0; k < count; ++k) params.layer_sizes.push_back(get_u64(in));
  params.dropout_rate = get_f64(in);
  params.weight_decay = get_f64(in);
  for (std::size_t l = 0; l + 1 < params.layer_sizes.size(); ++l) {
    nn::Layer layer = nn::Layer::zeros(params.layer_sizes[l], params.layer_sizes[l + 1]);
    for (double& w : layer.weights) w = get_f64(in);
    for (double& b : layer.bias) b = get_f64(in);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

std::string format_label(double c) {
  if (c == kEqualSeverity) return "0.5";
  return c == kFirstMoreSevere ? "1" : "0";
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_append(const fs::path& path, const char* header) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open '" + path.string() + "'");
  if (fresh && header) out << header << '\n' << std::flush;
  return out;
}

}  // namespace

RunDirectory::RunDirectory(fs::path root, const data::Dataset& dataset, const RunConfig& config)
    : root_(std::move(root)), dataset_(&dataset) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw IoError("cannot create run directory '" + root_.string() + "': " + ec.message());
  for (const char* name : {"pairs.csv", "selections.csv", "rounds.jsonl"}) fs::remove(root_ / name, ec);
  for (const auto& entry : fs::directory_iterator(root_))
    if (entry.path().filename().string().starts_with("params-round-")) fs::remove(entry.path(), ec);
  {
    std::ofstream out(root_ / "config.json", std::ios::trunc);
    if (!out) throw IoError("cannot write config.json");
    out << to_json(config).dump(2) << '\n';
  }
  pairs_ = open_append(root_ / "pairs.csv", "id_i,id_j,label,round,source");
  selections_ = open_append(root_ / "selections.csv", "round,id,variance");
  rounds_ = open_append(root_ / "rounds.jsonl", nullptr);
}

void RunDirectory::on_label(const rank::RelativePair& pair, int round, active::Source source) {
  pairs_ << (*dataset_)[pair.first].name << ',' << (*dataset_)[pair.second].name << ',' << format_label(pair.label)
         << ',' << round << ',' << active::to_string(source) << '\n'
         << std::flush;
}

void RunDirectory::on_selection(int round, std::span<const SampleId> ids,
                                std::span<const std::optional<double>> variances) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    selections_ << round << ',' << (*dataset_)[ids[k]].name << ',';
    if (k < variances.size() && variances[k]) selections_ << format_double(*variances[k]);
    selections_ << '\n';
  }
  selections_ << std::flush;
}

void RunDirectory::on_round(const json& record) { rounds_ << record.dump() << '\n' << std::flush; }

void RunDirectory::on_params(int round, const nn::NetworkParams& params) {
  save_params(params, root_ / ("params-round-" + std::to_string(round) + ".bin"));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename Row, typename Parse>
std::vector<Row> read_csv(const fs::path& path, std::size_t columns, Parse parse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<Row> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != columns) throw ParseError("expected " + std::to_string(columns) + " columns", number);
    try {
      rows.push_back(parse(cells));
    } catch (const std::logic_error&) {
      throw ParseError("malformed row in '" + path.string() + "'", number);
    }
  }
  return rows;
}

}  // namespace

std::vector<PairRow> read_pairs_csv(const fs::path& path) {
  return read_csv<PairRow>(path, 5, [](const std::vector<std::string>& c) {
    return PairRow{c[0], c[1], std::stod(c[2]), std::stoi(c[3]), c[4]};
  });
}

std::vector<SelectionRow> read_selections_csv(const fs::path& path) {
  return read_csv<SelectionRow>(path, 3, [](const std::vector<std::string>& c) {
    SelectionRow row{std::stoi(c[0]), c[1], std::nullopt};
    if (!c[2].empty()) row.variance = std::stod(c[2]);
    return row;
  });
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), number);
    }
  }
  return out;
}

std::optional<fs::path> last_params_snapshot(const fs::path& run_dir) {
  static const std::regex pattern(R"(params-round-(\d+)\.bin)");
  std::optional<fs::path> best;
  long best_round = -1;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const long round = std::stol(m[1]);
      if (round > best_round) {
        best_round = round;
        best = entry.path();
      }
    }
  }
  return best;
}

}  // namespace relrank::io
