#include "ptmf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ptmf/errors.hpp"

namespace ptmf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + key + "': cannot parse '" + text + "' as a number");
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("config key '" + key + "': expected true/false, got '" + text + "'");
}

// One accessor pair per key, in a fixed order.
struct Field {
  std::function<std::string(const ModelConfig&)> get;
  std::function<void(ModelConfig&, const std::string&, const std::string&)> set;
};

#define PTMF_SIZE(name, member)                                                             \
  {name, Field{[](const ModelConfig& c) { return std::to_string(c.member); },               \
               [](ModelConfig& c, const std::string& k, const std::string& v) {             \
                 c.member = parse_number<std::size_t>(k, v);                                 \
               }}}
#define PTMF_DOUBLE(name, member)                                                    \
  {name, Field{[](const ModelConfig& c) { return fmt_double(c.member); },            \
               [](ModelConfig& c, const std::string& k, const std::string& v) {      \
                 c.member = parse_double(k, v);                                       \
               }}}
#define PTMF_BOOL(name, member)                                                         \
  {name, Field{[](const ModelConfig& c) { return std::string(c.member ? "true" : "false"); }, \
               [](ModelConfig& c, const std::string& k, const std::string& v) {         \
                 c.member = parse_bool(k, v);                                            \
               }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      PTMF_SIZE("lld_dim", dims.lld),
      PTMF_SIZE("mfcc_dim", dims.mfcc),
      PTMF_SIZE("wav2vec_dim", dims.wav2vec),
      PTMF_SIZE("openface_dim", dims.openface),
      PTMF_SIZE("resnet_dim", dims.resnet),
      PTMF_SIZE("densenet_dim", dims.densenet),
      PTMF_SIZE("personality_dim", personality_dim),
      PTMF_SIZE("audio_hidden", audio_hidden),
      PTMF_SIZE("visual_hidden", visual_hidden),
      PTMF_SIZE("lld_proj", lld_proj),
      PTMF_SIZE("mfcc_proj", mfcc_proj),
      PTMF_SIZE("wav2vec_proj", wav2vec_proj),
      PTMF_BOOL("coatt_sigmoid", coatt_sigmoid),
      PTMF_SIZE("asp_dim", asp_dim),
      PTMF_DOUBLE("asp_eps", asp_eps),
      PTMF_SIZE("d_model", d_model),
      PTMF_SIZE("n_layers", n_layers),
      PTMF_SIZE("n_heads", n_heads),
      PTMF_SIZE("ffn_dim", ffn_dim),
      PTMF_SIZE("d_h", d_h),
      PTMF_SIZE("n_p", n_p),
      PTMF_SIZE("ptmfim_heads", ptmfim_heads),
      PTMF_BOOL("bca_personality_queries", bca_personality_queries),
      PTMF_BOOL("classifier_concat_fused", classifier_concat_fused),
      {"task", Field{[](const ModelConfig& c) { return std::string(io::task_name(c.task)); },
                     [](ModelConfig& c, const std::string&, const std::string& v) {
                       c.task = io::parse_task(v);
                     }}},
      PTMF_DOUBLE("dropout", dropout),
      PTMF_BOOL("multi_audio", ablation.multi_audio),
      PTMF_BOOL("co_att", ablation.co_att),
      PTMF_BOOL("multi_visual", ablation.multi_visual),
      PTMF_BOOL("ptmfim", ablation.ptmfim),
      {"seed", Field{[](const ModelConfig& c) { return std::to_string(c.seed); },
                     [](ModelConfig& c, const std::string& k, const std::string& v) {
                       c.seed = parse_number<std::uint64_t>(k, v);
                     }}},
      PTMF_DOUBLE("lr", lr),
      PTMF_DOUBLE("beta1", beta1),
      PTMF_DOUBLE("beta2", beta2),
      PTMF_DOUBLE("adam_eps", adam_eps),
      PTMF_DOUBLE("weight_decay", weight_decay),
      PTMF_SIZE("epochs", epochs),
      PTMF_SIZE("batch_size", batch_size),
      PTMF_DOUBLE("val_fraction", val_fraction),
  };
  return table;
}

#undef PTMF_SIZE
#undef PTMF_DOUBLE
#undef PTMF_BOOL

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(dims.lld, "lld_dim");
  positive(dims.mfcc, "mfcc_dim");
  positive(dims.wav2vec, "wav2vec_dim");
  positive(dims.openface, "openface_dim");
  positive(dims.resnet, "resnet_dim");
  positive(dims.densenet, "densenet_dim");
  positive(personality_dim, "personality_dim");
  positive(audio_hidden, "audio_hidden");
  positive(visual_hidden, "visual_hidden");
  positive(lld_proj, "lld_proj");
  positive(mfcc_proj, "mfcc_proj");
  positive(wav2vec_proj, "wav2vec_proj");
  positive(asp_dim, "asp_dim");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(ffn_dim, "ffn_dim");
  positive(d_h, "d_h");
  positive(n_p, "n_p");
  positive(ptmfim_heads, "ptmfim_heads");
  positive(batch_size, "batch_size");
  if (d_model % n_heads != 0) throw ValidationError("config: d_model must be divisible by n_heads");
  if (d_h % ptmfim_heads != 0) throw ValidationError("config: d_h must be divisible by ptmfim_heads");
  if (!(asp_eps > 0.0)) throw ValidationError("config: asp_eps must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("config: dropout must lie in [0, 1)");
  if (!(lr > 0.0)) throw ValidationError("config: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("config: betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("config: adam_eps must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ValidationError("config: val_fraction must lie in [0, 1)");
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
  return out;
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, trim(value));
      return;
    }
  }
  throw ValidationError("unknown config key '" + key + "'");
}

std::string ModelConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_kv()) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_kv_file(ModelConfig& cfg, const std::filesystem::path& path) {
  for (const auto& [k, v] : read_kv_file(path)) cfg.set(k, v);
}

void write_config_file(const ModelConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write config file: " + path.string());
  os << cfg.to_text();
}

}  // namespace ptmf
