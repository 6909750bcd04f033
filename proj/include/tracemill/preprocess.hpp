#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracemill/corpus.hpp"
#include "tracemill/modelclient.hpp"

namespace tracemill::preprocess {

using corpus::ImageRef;
using corpus::Question;

struct ResizePolicy {
  std::int64_t max_pixels = 262144;
  std::int64_t min_pixels = 3136;
  std::int64_t factor = 28;

  void validate() const;
};

struct Dims {
  std::int64_t height = 0;
  std::int64_t width = 0;
  bool operator==(const Dims&) const = default;
};

inline constexpr double kMaxAspectRatio = 200.0;

/// Patch-aligned, area-bounded target size. Each side is first rounded to the
/// nearest multiple of factor; if the area then exceeds max_pixels both sides
/// are scaled by sqrt(max_pixels / (h*w)) and floored to multiples of factor,
/// if below min_pixels scaled by sqrt(min_pixels / (h*w)) and ceiled.
/// Throws ValidationError for aspect ratios above 200:1.
Dims smart_resize(std::int64_t height, std::int64_t width, const ResizePolicy& policy = {});

/// `dir/name.png` -> `dir/name.rsz.png`
std::filesystem::path resized_path(const std::filesystem::path& original);

/// Decodes the image, resizes it to smart_resize() dimensions and writes it
/// next to the original with the `.rsz` suffix; the digest is recomputed from
/// the written bytes. An already-conforming image is returned unchanged
/// (dimensions and digest taken from the file). Relative paths resolve
/// against base_dir. With out_dir set, the resized file goes there instead,
/// prefixed with the source digest. Throws ValidationError naming the path
/// when the bytes do not decode.
ImageRef apply_resize(const ImageRef& img, const ResizePolicy& policy = {}, const std::filesystem::path& base_dir = {},
                      const std::filesystem::path& out_dir = {});

/// Classes are gold_answer letters. Each class keeps min(count, cap) members,
/// cap defaulting to the smallest class size. Members are drawn uniformly per
/// class with a seed derived from (seed, class); survivors keep input order.
std::vector<Question> stratified_balance(std::span<const Question> qs, std::uint64_t seed,
                                         std::optional<std::size_t> per_class_cap = std::nullopt);

const std::vector<std::string>& modality_vocabulary();
const std::vector<std::string>& region_vocabulary();

struct Annotation {
  std::string modality = "other";
  std::string region = "other";
};

/// Prompt sent to the judge for metadata annotation.
std::string annotation_prompt(const Question& q);
/// Parses "<modality> / <region>"; anything outside the vocabularies maps to "other".
Annotation parse_annotation(std::string_view judge_output);

struct Annotated {
  Question question;
  std::optional<std::string> error;  // set when the judge failed; question is then unannotated
};

Annotated annotate_metadata(const Question& q, modelclient::ModelClient& judge,
                            const modelclient::SamplingParams& params = {0.0, 1.0, 64, 1, std::nullopt});

}  // namespace tracemill::preprocess
