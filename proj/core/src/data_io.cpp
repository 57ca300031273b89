#include "ptmf/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ptmf/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ptmf::io {

// ---- feature files --------------------------------------------------------

namespace {
constexpr char kFeatureMagic[4] = {'M', 'P', 'F', 'T'};
}

void write_feature_file(const FeatureMatrix& m, const fs::path& path) {
  m.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open feature file for writing: " + path.string());
  const std::uint32_t header[3] = {kFeatureFileVersion, static_cast<std::uint32_t>(m.rows),
                                   static_cast<std::uint32_t>(m.cols)};
  os.write(kFeatureMagic, 4);
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> narrow(m.values.begin(), m.values.end());
  for (std::size_t i = 0; i < narrow.size(); ++i) {
    if (!std::isfinite(narrow[i])) {
      throw ValidationError("feature value " + std::to_string(m.values[i]) + " at index " +
                            std::to_string(i) + " overflows f32");
    }
  }
  os.write(reinterpret_cast<const char*>(narrow.data()),
           static_cast<std::streamsize>(narrow.size() * sizeof(float)));
  if (!os) throw IoError("failed writing feature file: " + path.string());
}

FeatureMatrix read_feature_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw FormatError("feature file " + path.string() + ": bad magic");
  }
  std::uint32_t header[3];
  if (!is.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw FormatError("feature file " + path.string() + ": truncated header");
  }
  if (header[0] != kFeatureFileVersion) {
    throw FormatError("feature file " + path.string() + ": unsupported version " +
                      std::to_string(header[0]));
  }
  if (header[1] == 0 || header[2] == 0) {
    throw FormatError("feature file " + path.string() + ": empty matrix");
  }
  const std::size_t n = static_cast<std::size_t>(header[1]) * header[2];
  std::vector<float> narrow(n);
  if (!is.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw FormatError("feature file " + path.string() + ": truncated payload");
  }
  FeatureMatrix m(header[1], header[2]);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(narrow[i])) {
      throw FormatError("feature file " + path.string() + ": non-finite value at index " +
                        std::to_string(i));
    }
    m.values[i] = narrow[i];
  }
  return m;
}

// ---- tasks ----------------------------------------------------------------

std::size_t num_classes(Task task) {
  switch (task) {
    case Task::kBinary: return 2;
    case Task::kTernary: return 3;
    case Task::kQuinary: return 5;
  }
  return 0;
}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kBinary: return "binary";
    case Task::kTernary: return "ternary";
    case Task::kQuinary: return "quinary";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  if (name == "binary") return Task::kBinary;
  if (name == "ternary") return Task::kTernary;
  if (name == "quinary") return Task::kQuinary;
  throw ValidationError("unknown task '" + std::string(name) + "' (expected binary, ternary or quinary)");
}

int label_from_severity(int severity, Task task) {
  switch (task) {
    case Task::kBinary: return severity >= 1 ? 1 : 0;
    case Task::kTernary: return severity == 0 ? 0 : (severity <= 2 ? 1 : 2);
    case Task::kQuinary: return severity;
  }
  return 0;
}

int TaskLabels::get(Task task) const {
  switch (task) {
    case Task::kBinary: return binary;
    case Task::kTernary: return ternary;
    case Task::kQuinary: return quinary;
  }
  return 0;
}

std::size_t StreamDims::get(std::string_view stream) const {
  if (stream == "lld") return lld;
  if (stream == "mfcc") return mfcc;
  if (stream == "wav2vec") return wav2vec;
  if (stream == "openface") return openface;
  if (stream == "resnet") return resnet;
  if (stream == "densenet") return densenet;
  throw ValidationError("unknown stream '" + std::string(stream) + "'");
}

// ---- manifest -------------------------------------------------------------

namespace {

std::string trait_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  throw ValidationError("trait score must be a string or a number");
}

void parse_stream_map(const json& obj, const char* field, std::span<const std::string_view> streams,
                      const fs::path& base, std::map<std::string, fs::path>& out,
                      std::vector<std::string>& problems) {
  if (!obj.contains(field) || !obj[field].is_object()) {
    problems.push_back(std::string("missing object field '") + field + "'");
    return;
  }
  for (std::string_view s : streams) {
    const std::string key(s);
    if (!obj[field].contains(key) || !obj[field][key].is_string()) {
      problems.push_back(std::string(field) + "." + key + " missing");
      continue;
    }
    fs::path p = obj[field][key].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) problems.push_back("dangling path " + p.string());
    out[key] = p;
  }
}

SampleRecord parse_record(const json& obj, const fs::path& base, std::vector<std::string>& problems) {
  SampleRecord r;
  if (!obj.is_object()) {
    problems.push_back("record is not a JSON object");
    return r;
  }
  if (obj.contains("id") && obj["id"].is_string()) {
    r.id = obj["id"].get<std::string>();
  } else {
    problems.push_back("missing string field 'id'");
  }
  parse_stream_map(obj, "audio_paths", kAudioStreams, base, r.audio_paths, problems);
  parse_stream_map(obj, "visual_paths", kVisualStreams, base, r.visual_paths, problems);

  if (!obj.contains("personality") || !obj["personality"].is_object()) {
    problems.push_back("missing object field 'personality'");
  } else {
    const json& p = obj["personality"];
    const std::pair<const char*, std::string*> traits[] = {
        {"extraversion", &r.personality.extraversion},
        {"agreeableness", &r.personality.agreeableness},
        {"openness", &r.personality.openness},
        {"neuroticism", &r.personality.neuroticism},
        {"conscientiousness", &r.personality.conscientiousness}};
    for (const auto& [name, slot] : traits) {
      if (!p.contains(name)) {
        problems.push_back(std::string("personality.") + name + " missing");
        continue;
      }
      try {
        *slot = trait_text(p[name]);
      } catch (const ValidationError& e) {
        problems.push_back(std::string("personality.") + name + ": " + e.what());
      }
    }
    if (!p.contains("age") || !p["age"].is_number()) {
      problems.push_back("personality.age missing");
    } else {
      const double age = p["age"].get<double>();
      if (!(age > 0)) problems.push_back("personality.age must be positive");
      r.personality.age = static_cast<int>(std::lround(age));
    }
    for (const auto& [name, slot] : {std::pair{"gender", &r.personality.gender},
                                     std::pair{"origin", &r.personality.origin}}) {
      if (!p.contains(name) || !p[name].is_string()) {
        problems.push_back(std::string("personality.") + name + " missing");
      } else {
        *slot = p[name].get<std::string>();
      }
    }
  }

  if (obj.contains("personality_embedding_path") && !obj["personality_embedding_path"].is_null()) {
    fs::path p = obj["personality_embedding_path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) problems.push_back("dangling path " + p.string());
    r.personality_embedding_path = p;
  }

  if (!obj.contains("labels") || !obj["labels"].is_object()) {
    problems.push_back("missing object field 'labels'");
  } else {
    const json& l = obj["labels"];
    const std::tuple<const char*, int*, int> slots[] = {{"binary", &r.labels.binary, 2},
                                                        {"ternary", &r.labels.ternary, 3},
                                                        {"quinary", &r.labels.quinary, 5}};
    for (const auto& [name, slot, n] : slots) {
      if (!l.contains(name) || !l[name].is_number_integer()) {
        problems.push_back(std::string("missing ") + name + " label");
        continue;
      }
      const long long v = l[name].get<long long>();
      if (v < 0 || v >= n) {
        problems.push_back(std::string(name) + " label " + std::to_string(v) + " out of range [0," +
                           std::to_string(n - 1) + "]");
      }
      *slot = static_cast<int>(v);
    }
  }
  return r;
}

std::string relative_if_inside(const fs::path& p, const fs::path& base) {
  const fs::path rel = p.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

}  // namespace

std::vector<SampleRecord> load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  const fs::path base = path.parent_path();
  std::vector<SampleRecord> records;
  std::vector<std::string> errors;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> problems;
    SampleRecord rec;
    try {
      rec = parse_record(json::parse(line), base, problems);
    } catch (const json::exception& e) {
      problems.push_back(std::string("invalid JSON: ") + e.what());
    }
    if (!rec.id.empty() && !ids.insert(rec.id).second) problems.push_back("duplicate id '" + rec.id + "'");
    for (const auto& p : problems) errors.push_back(path.string() + ":" + std::to_string(line_no) + ": " + p);
    if (problems.empty()) records.push_back(std::move(rec));
  }
  if (!errors.empty()) {
    std::string msg = "invalid manifest (" + std::to_string(errors.size()) + " problems):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return records;
}

void write_manifest(const fs::path& path, std::span<const SampleRecord> records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open manifest for writing: " + path.string());
  const fs::path base = path.parent_path();
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    for (const auto& [k, p] : r.audio_paths) j["audio_paths"][k] = relative_if_inside(p, base);
    for (const auto& [k, p] : r.visual_paths) j["visual_paths"][k] = relative_if_inside(p, base);
    const auto& pp = r.personality;
    j["personality"] = {{"extraversion", pp.extraversion},   {"agreeableness", pp.agreeableness},
                        {"openness", pp.openness},           {"neuroticism", pp.neuroticism},
                        {"conscientiousness", pp.conscientiousness},
                        {"age", pp.age},                     {"gender", pp.gender},
                        {"origin", pp.origin}};
    if (r.personality_embedding_path) {
      j["personality_embedding_path"] = relative_if_inside(*r.personality_embedding_path, base);
    }
    j["labels"] = {{"binary", r.labels.binary}, {"ternary", r.labels.ternary}, {"quinary", r.labels.quinary}};
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing manifest: " + path.string());
}

// ---- prompt ---------------------------------------------------------------

std::string build_prompt(const PersonalityProfile& p) {
  std::string out;
  out += "The patient is a " + std::to_string(p.age) + " " + p.gender + " from " + p.origin + ".\n";
  out += "The patient's Extraversion score is " + p.extraversion + ".\n";
  out += "The Agreeableness score is " + p.agreeableness + ".\n";
  out += "The Openness score is " + p.openness + ".\n";
  out += "The Neuroticism score is " + p.neuroticism + ".\n";
  out += "The Conscientiousness score is " + p.conscientiousness + ".\n";
  out += "Please generate a concise, fluent English description summarizing the patient's key "
         "personality traits, family environment, and other notable characteristics.\n";
  out += "Avoid mentioning depression or related terminology.\n";
  out += "Output the response as a single paragraph.";
  return out;
}

namespace {

// FNV-1a; std::hash is not guaranteed stable across library versions.
std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double trait_value(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "low") return -1.0;
  if (lower == "medium" || lower == "average" || lower == "moderate") return 0.0;
  if (lower == "high") return 1.0;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v / 50.0;
  } catch (const std::exception&) {
  }
  // Unrecognised word: stable value in [-1, 1).
  return static_cast<double>(stable_hash(lower) % 2000) / 1000.0 - 1.0;
}

}  // namespace

std::vector<double> profile_embedding(const PersonalityProfile& p, std::size_t dim) {
  std::vector<double> features = {trait_value(p.extraversion), trait_value(p.agreeableness),
                                  trait_value(p.openness),     trait_value(p.neuroticism),
                                  trait_value(p.conscientiousness), p.age / 100.0};
  std::string g(p.gender);
  std::transform(g.begin(), g.end(), g.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  features.push_back(g == "male" ? 1.0 : (g == "female" ? -1.0 : 0.0));
  const std::uint64_t h = stable_hash(p.origin);
  for (int k = 0; k < 4; ++k) features.push_back(static_cast<double>((h >> (16 * k)) & 0xffff) / 32768.0 - 1.0);
  features.resize(dim, 0.0);
  return features;
}

// ---- synthetic data -------------------------------------------------------

namespace {

// Five unit directions in R^d, orthonormal when d >= 5.
std::vector<std::vector<double>> severity_directions(std::size_t d, ptmf::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> dirs;
  for (int q = 0; q < 5; ++q) {
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    if (d >= 5) {
      for (const auto& u : dirs) {
        const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * u[i];
      }
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

int severity_for_class(int cls, Task task, ptmf::Rng& rng) {
  switch (task) {
    case Task::kQuinary: return cls;
    case Task::kTernary:
      if (cls == 0) return 0;
      return std::uniform_int_distribution<int>(0, 1)(rng) + (cls == 1 ? 1 : 3);
    case Task::kBinary:
      if (cls == 0) return 0;
      return std::uniform_int_distribution<int>(1, 4)(rng);
  }
  return 0;
}

}  // namespace

std::vector<SampleRecord> synth_dataset(const SynthSpec& spec, const fs::path& out_dir) {
  if (!(spec.class_sep >= 0.0)) throw ValidationError("class_sep must be non-negative");
  if (spec.t_min == 0 || spec.t_max < spec.t_min) throw ValidationError("synth requires 1 <= t_min <= t_max");
  if (spec.personality_dim == 0) throw ValidationError("personality_dim must be positive");
  const double psep = spec.personality_sep < 0.0 ? spec.class_sep : spec.personality_sep;

  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "features").string() + ": " + ec.message());

  ptmf::Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::string> streams;
  for (auto s : kAudioStreams) streams.emplace_back(s);
  for (auto s : kVisualStreams) streams.emplace_back(s);
  std::map<std::string, std::vector<std::vector<double>>> directions;
  for (const auto& s : streams) directions[s] = severity_directions(spec.dims.get(s), rng);
  const auto personality_dirs = severity_directions(spec.personality_dim, rng);

  const auto n_cls = static_cast<int>(num_classes(spec.task));
  std::vector<int> classes(spec.n_samples);
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = static_cast<int>(i) % n_cls;
  std::shuffle(classes.begin(), classes.end(), rng);

  static constexpr const char* kOrigins[] = {"Beijing", "Shanghai", "Chengdu", "Wuhan", "Xi'an", "Harbin"};
  std::uniform_int_distribution<int> trait_score(10, 60);
  std::uniform_int_distribution<int> age_dist(60, 90);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<std::size_t> origin_pick(0, std::size(kOrigins) - 1);
  std::uniform_int_distribution<std::size_t> frames(spec.t_min, spec.t_max);

  std::vector<SampleRecord> records;
  records.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const int severity = severity_for_class(classes[i], spec.task, rng);
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "s%04zu", i);
    SampleRecord r;
    r.id = id_buf;
    r.labels = {label_from_severity(severity, Task::kBinary), label_from_severity(severity, Task::kTernary),
                severity};

    for (const auto& s : streams) {
      const std::size_t d = spec.dims.get(s);
      const std::size_t t = frames(rng);
      const auto& dir = directions[s][static_cast<std::size_t>(severity)];
      FeatureMatrix m(t, d);
      for (std::size_t f = 0; f < t; ++f)
        for (std::size_t c = 0; c < d; ++c) m(f, c) = spec.class_sep * dir[c] + noise(rng);
      const fs::path p = out_dir / "features" / (r.id + "_" + s + ".mpft");
      write_feature_file(m, p);
      const bool audio = std::find(kAudioStreams.begin(), kAudioStreams.end(), s) != kAudioStreams.end();
      (audio ? r.audio_paths : r.visual_paths)[s] = p;
    }

    FeatureMatrix emb(1, spec.personality_dim);
    const auto& pdir = personality_dirs[static_cast<std::size_t>(severity)];
    for (std::size_t c = 0; c < spec.personality_dim; ++c) emb(0, c) = psep * pdir[c] + noise(rng);
    const fs::path ep = out_dir / "features" / (r.id + "_personality.mpft");
    write_feature_file(emb, ep);
    r.personality_embedding_path = ep;

    r.personality.extraversion = std::to_string(trait_score(rng));
    r.personality.agreeableness = std::to_string(trait_score(rng));
    r.personality.openness = std::to_string(trait_score(rng));
    r.personality.neuroticism = std::to_string(trait_score(rng));
    r.personality.conscientiousness = std::to_string(trait_score(rng));
    r.personality.age = age_dist(rng);
    r.personality.gender = coin(rng) ? "male" : "female";
    r.personality.origin = kOrigins[origin_pick(rng)];
    records.push_back(std::move(r));
  }
  write_manifest(out_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace ptmf::io
