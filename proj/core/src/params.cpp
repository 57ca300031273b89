#include "ptmf/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "ptmf/errors.hpp"

namespace ptmf {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

Tensor ParamStore::create(std::string name, const Tensor& init) {
  if (find(name) != nullptr) throw ValidationError("duplicate parameter name: " + name);
  Tensor t = init.clone(/*requires_grad=*/true);
  params_.push_back({std::move(name), t});
  return t;
}

const Parameter* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParamStore::count_with_prefix(std::string_view prefix) const {
  return static_cast<std::size_t>(std::count_if(params_.begin(), params_.end(), [&](const auto& p) {
    return std::string_view(p.name).substr(0, prefix.size()) == prefix;
  }));
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParamStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void ParamStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ValidationError("snapshot size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_data();
    if (values[i].size() != dst.size()) throw ValidationError("snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'T', 'M', 'F'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    throw FormatError("checkpoint " + path.string() + ": truncated");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& shape = p.tensor.shape();
    put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) put_u32(os, static_cast<std::uint32_t>(e));
    const auto data = p.tensor.data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<Parameter> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  }
  const std::uint32_t version = get_u32(is, path);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path.string() + ": unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t count = get_u32(is, path);
  std::vector<Parameter> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = get_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("checkpoint " + path.string() + ": truncated");
    const std::uint32_t rank = get_u32(is, path);
    Shape shape(rank);
    for (auto& e : shape) e = get_u32(is, path);
    std::vector<double> values(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw FormatError("checkpoint " + path.string() + ": truncated payload for " + name);
    }
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true)});
  }
  return out;
}

void load_checkpoint_into(ParamStore& store, const std::vector<Parameter>& loaded) {
  if (loaded.size() != store.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(loaded.size()) +
                          " parameters, model expects " + std::to_string(store.size()));
  }
  for (auto& p : store.params()) {
    auto it = std::find_if(loaded.begin(), loaded.end(),
                           [&](const Parameter& q) { return q.name == p.name; });
    if (it == loaded.end()) throw ValidationError("checkpoint lacks parameter " + p.name);
    if (it->tensor.shape() != p.tensor.shape()) {
      throw DimensionError("checkpoint parameter " + p.name + " has shape " +
                           shape_str(it->tensor.shape()) + ", model expects " +
                           shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(it->tensor.data().begin(), it->tensor.data().end(), dst.begin());
  }
}

// ---- gradient check -------------------------------------------------------

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const Parameter> params, const GradCheckOptions& options) {
  auto evaluate = [&] {
    NoGradGuard guard;
    return loss_fn().item();
  };
  const double base_a = evaluate();
  const double base_b = evaluate();
  if (std::memcmp(&base_a, &base_b, sizeof(double)) != 0) {
    throw ValidationError("grad_check: loss function is not deterministic");
  }

  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  loss_fn().backward();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (const auto& p : params) {
    Tensor t = p.tensor;
    auto values = t.mutable_data();
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());

    std::vector<std::size_t> indices(values.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (options.max_elements != 0 && indices.size() > options.max_elements) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_elements);
      std::sort(indices.begin(), indices.end());
    }

    GradCheckEntry entry{p.name, indices.size(), 0.0};
    for (std::size_t i : indices) {
      const double saved = values[i];
      const auto at = [&](double offset) {
        values[i] = saved + offset;
        return evaluate();
      };
      const double h = options.eps;
      double numeric = 0.0;
      if (options.five_point) {
        const double m2 = at(-2 * h), m1 = at(-h), p1 = at(h), p2 = at(2 * h);
        // Differences first: equal evaluations must give exactly zero.
        numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
      } else {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      }
      values[i] = saved;
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ptmf
