#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptmf/feature_matrix.hpp"

namespace ptmf::io {

// ---- feature files --------------------------------------------------------
// "MPFT", u32 version (1), u32 T, u32 D, then T*D f32 little-endian row-major.

inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_feature_file(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_feature_file(const std::filesystem::path& path);

// ---- tasks and records ----------------------------------------------------

enum class Task { kBinary, kTernary, kQuinary };

std::size_t num_classes(Task task);
std::string_view task_name(Task task);
Task parse_task(std::string_view name);
// Severity 0..4 mapped onto each task's label space.
int label_from_severity(int severity, Task task);

inline constexpr std::array<std::string_view, 3> kAudioStreams = {"lld", "mfcc", "wav2vec"};
inline constexpr std::array<std::string_view, 3> kVisualStreams = {"openface", "resnet", "densenet"};

struct PersonalityProfile {
  // Trait scores are kept as given (a level word or a number's text form).
  std::string extraversion;
  std::string agreeableness;
  std::string openness;
  std::string neuroticism;
  std::string conscientiousness;
  int age = 0;
  std::string gender;
  std::string origin;

  friend bool operator==(const PersonalityProfile&, const PersonalityProfile&) = default;
};

struct TaskLabels {
  int binary = 0;
  int ternary = 0;
  int quinary = 0;

  int get(Task task) const;
};

struct SampleRecord {
  std::string id;
  std::map<std::string, std::filesystem::path> audio_paths;
  std::map<std::string, std::filesystem::path> visual_paths;
  PersonalityProfile personality;
  std::optional<std::filesystem::path> personality_embedding_path;
  TaskLabels labels;
};

/// JSON-lines manifest, one SampleRecord per line. Relative paths resolve
/// against the manifest's directory. Every invalid line is reported in a
/// single ValidationError; a missing manifest raises IoError.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const SampleRecord> records);

/// Fills the fixed patient prompt template with the profile's slots.
std::string build_prompt(const PersonalityProfile& profile);

/// Deterministic numeric stand-in for a text embedding of the profile, used
/// when a record carries no personality embedding file.
std::vector<double> profile_embedding(const PersonalityProfile& profile, std::size_t dim);

// ---- synthetic data -------------------------------------------------------

struct StreamDims {
  std::size_t lld = 2;
  std::size_t mfcc = 13;
  std::size_t wav2vec = 32;
  std::size_t openface = 16;
  std::size_t resnet = 32;
  std::size_t densenet = 32;

  std::size_t get(std::string_view stream) const;
};

struct SynthSpec {
  std::size_t n_samples = 40;
  double class_sep = 1.0;        // stream mean offset, in noise standard deviations
  double personality_sep = -1.0;  // negative: same as class_sep
  StreamDims dims;
  std::size_t personality_dim = 64;
  std::size_t t_min = 8;
  std::size_t t_max = 16;
  Task task = Task::kBinary;  // classes of this task are balanced
  std::uint64_t seed = 0;
};

/// Writes feature files and `manifest.jsonl` under `out_dir` and returns the
/// records. Labels for all three tasks derive from one latent severity.
std::vector<SampleRecord> synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace ptmf::io
