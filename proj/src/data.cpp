#include "relrank/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "relrank/error.hpp"

namespace relrank::data {

using nlohmann::json;

Dataset::Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
  if (!samples_.empty()) feature_dim_ = samples_.front().features.size();
  by_name_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.features.size() != feature_dim_)
      throw SchemaError("sample '" + s.name + "' has " + std::to_string(s.features.size()) +
                        " features, expected " + std::to_string(feature_dim_));
    if (s.label && *s.label < 0) throw SchemaError("sample '" + s.name + "' has a negative label");
    if (!by_name_.emplace(s.name, SampleId{i}).second) throw SchemaError("duplicate id '" + s.name + "'");
    if (s.label) num_classes_ = std::max(num_classes_, *s.label + 1);
  }
  if (!samples_.empty() && feature_dim_ == 0) throw SchemaError("samples have no features");
}

bool Dataset::fully_labeled() const noexcept {
  return std::all_of(samples_.begin(), samples_.end(), [](const Sample& s) { return s.label.has_value(); });
}

std::optional<SampleId> Dataset::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<SampleId> Dataset::all_ids() const {
  std::vector<SampleId> ids(samples_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = SampleId{i};
  return ids;
}

namespace {

std::string id_token(const json& v, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError("'id' must be a string or integer", line);
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  std::vector<Sample> samples;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line);
    }
    if (!record.is_object()) throw ParseError("record is not an object", line);
    if (!record.contains("id")) throw ParseError("missing 'id'", line);
    if (!record.contains("features") || !record["features"].is_array())
      throw ParseError("missing or non-array 'features'", line);

    Sample s;
    s.name = id_token(record["id"], line);
    for (const json& f : record["features"]) {
      if (!f.is_number()) throw ParseError("non-numeric feature", line);
      s.features.push_back(f.get<double>());
    }
    if (auto it = record.find("label"); it != record.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw ParseError("'label' must be an integer", line);
      s.label = it->get<int>();
    }
    if (auto it = record.find("group"); it != record.end() && !it->is_null())
      s.group = it->is_string() ? it->get<std::string>() : it->dump();
    else
      s.group = s.name;
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  for (const Sample& s : dataset.samples()) {
    json record{{"id", s.name}, {"features", s.features}, {"group", s.group}};
    if (s.label) record["label"] = *s.label;
    out << record.dump() << '\n';
  }
}

// --- synthetic data ---------------------------------------------------------

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (class_proportions.size() != static_cast<std::size_t>(num_classes))
    throw ConfigError("class_proportions must have num_classes entries");
  double total = 0.0;
  for (double p : class_proportions) {
    if (!(p >= 0.0)) throw ConfigError("class proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class proportions must sum to 1");
  if (n < static_cast<std::size_t>(num_classes)) throw ConfigError("n must be at least num_classes");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (informative_dims == 0 || informative_dims > feature_dim)
    throw ConfigError("informative_dims must be in [1, feature_dim]");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be nonnegative");
  if (group_size == 0) throw ConfigError("group_size must be positive");
}

namespace {

struct SynthDraw {
  std::vector<Sample> samples;
  std::vector<double> latent;
};

SynthDraw synth_draw(const SynthConfig& config) {
  config.validate();
  Engine rng = make_engine(config.seed, Stream::synth);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Unit projection spanning the informative coordinates.
  std::vector<double> w(config.informative_dims);
  double norm = 0.0;
  do {
    for (double& v : w) v = gauss(rng);
    norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
  } while (norm < 1e-6);
  for (double& v : w) v /= norm;

  std::vector<double> cumulative(config.class_proportions.size());
  std::partial_sum(config.class_proportions.begin(), config.class_proportions.end(), cumulative.begin());

  const std::size_t width = std::to_string(config.n - 1).size();
  auto padded = [width](const char* prefix, std::size_t v) {
    std::string digits = std::to_string(v);
    return prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
  };

  SynthDraw out;
  out.samples.reserve(config.n);
  out.latent.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const double u = uniform01(rng) * cumulative.back();
    int c = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    c = std::min(c, config.num_classes - 1);
    const double z = c + uniform01(rng);

    Sample s;
    s.name = padded("s", i);
    s.label = c;
    s.group = padded("g", i / config.group_size);
    s.features.resize(config.feature_dim);
    for (std::size_t d = 0; d < config.informative_dims; ++d)
      s.features[d] = w[d] * z + config.noise_scale * gauss(rng);
    for (std::size_t d = config.informative_dims; d < config.feature_dim; ++d) s.features[d] = gauss(rng);
    out.samples.push_back(std::move(s));
    out.latent.push_back(z);
  }
  return out;
}

}  // namespace

Dataset synth_generate(const SynthConfig& config) { return Dataset(synth_draw(config).samples); }

std::vector<double> synth_latent(const SynthConfig& config) { return synth_draw(config).latent; }

// --- splitting --------------------------------------------------------------

Split split_groupwise(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-2) throw ConfigError("split fractions must sum to 1");
  for (double& f : fractions) f /= total;

  std::vector<std::string> groups;
  std::unordered_map<std::string, std::vector<SampleId>> members;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string& g = dataset.samples()[i].group;
    auto [it, inserted] = members.try_emplace(g);
    if (inserted) groups.push_back(g);
    it->second.push_back(SampleId{i});
  }
  if (groups.size() < 3) throw ConfigError("need at least 3 groups to split, got " + std::to_string(groups.size()));

  Engine rng = make_engine(seed, Stream::split);
  for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[uniform_index(rng, i)]);

  // A group goes to the split whose cumulative target range contains the
  // midpoint of the group's own cumulative range.
  const double n = static_cast<double>(dataset.size());
  const double cut_train = fractions[0] * n;
  const double cut_val = (fractions[0] + fractions[1]) * n;
  std::array<std::vector<std::string>, 3> assigned;
  double cumulative = 0.0;
  for (const std::string& g : groups) {
    const double size = static_cast<double>(members[g].size());
    const double mid = cumulative + 0.5 * size;
    const int slot = mid < cut_train ? 0 : (mid < cut_val ? 1 : 2);
    assigned[slot].push_back(g);
    cumulative += size;
  }
  // Every split with a positive fraction receives at least one group.
  for (int slot = 0; slot < 3; ++slot) {
    if (!assigned[slot].empty() || fractions[slot] == 0.0) continue;
    auto donor = std::max_element(assigned.begin(), assigned.end(),
                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (donor->size() < 2) continue;
    assigned[slot].push_back(donor->back());
    donor->pop_back();
  }

  Split split;
  std::array<std::vector<SampleId>*, 3> out{&split.train, &split.validation, &split.test};
  for (int slot = 0; slot < 3; ++slot) {
    for (const std::string& g : assigned[slot])
      out[slot]->insert(out[slot]->end(), members[g].begin(), members[g].end());
    std::sort(out[slot]->begin(), out[slot]->end());
  }
  return split;
}

// --- oracles ----------------------------------------------------------------

double oracle_relative(const Dataset& dataset, SampleId first, SampleId second) {
  const auto a = dataset.label(first);
  const auto b = dataset.label(second);
  if (!a || !b)
    throw OracleError("sample '" + dataset[!a ? first : second].name + "' has no ordinal label");
  if (*a > *b) return kFirstMoreSevere;
  if (*a == *b) return kEqualSeverity;
  return kSecondMoreSevere;
}

RelativeOracle::RelativeOracle(const Dataset& dataset, double flip_probability, std::uint64_t seed)
    : dataset_(&dataset), flip_probability_(flip_probability), seed_(seed) {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw ConfigError("flip probability must be in [0, 1]");
}

double RelativeOracle::operator()(SampleId first, SampleId second) const {
  const double c = oracle_relative(*dataset_, first, second);
  if (flip_probability_ == 0.0 || c == kEqualSeverity) return c;
  // Keyed on the ordered pair so that a repeated question gets the same answer.
  Engine rng = make_engine(seed_, Stream::oracle, {first.value, second.value});
  return uniform01(rng) < flip_probability_ ? 1.0 - c : c;
}

AbsoluteOracle::Answer AbsoluteOracle::query(SampleId id) {
  const auto label = dataset_->label(id);
  if (!label) throw OracleError("sample '" + (*dataset_)[id].name + "' has no ordinal label");
  ++total_;
  const bool hit = !seen_.insert(id).second;
  return {*label, hit};
}

}  // namespace relrank::data
