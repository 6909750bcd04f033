#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "tracemill/preprocess.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::preprocess {

namespace fs = std::filesystem;

void ResizePolicy::validate() const {
  if (factor < 1) throw ConfigError("resize factor must be >= 1");
  if (min_pixels < 1) throw ConfigError("min_pixels must be >= 1");
  if (min_pixels > max_pixels) throw ConfigError("min_pixels must not exceed max_pixels");
  if (max_pixels < factor * factor) throw ConfigError("max_pixels is smaller than one patch");
}

Dims smart_resize(std::int64_t height, std::int64_t width, const ResizePolicy& policy) {
  policy.validate();
  if (height < 1 || width < 1) throw ValidationError("image dimensions must be positive");
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  if (std::max(h, w) / std::min(h, w) > kMaxAspectRatio)
    throw ValidationError("aspect ratio " + std::to_string(std::max(h, w) / std::min(h, w)) + " exceeds 200:1");

  const auto f = policy.factor;
  const double fd = static_cast<double>(f);
  auto snap = [&](double v, auto op) { return std::max<std::int64_t>(f, static_cast<std::int64_t>(op(v / fd)) * f); };

  std::int64_t nh = snap(h, [](double x) { return std::round(x); });
  std::int64_t nw = snap(w, [](double x) { return std::round(x); });
  if (nh * nw > policy.max_pixels) {
    const double beta = std::sqrt(h * w / static_cast<double>(policy.max_pixels));
    nh = snap(h / beta, [](double x) { return std::floor(x); });
    nw = snap(w / beta, [](double x) { return std::floor(x); });
  } else if (nh * nw < policy.min_pixels) {
    const double beta = std::sqrt(static_cast<double>(policy.min_pixels) / (h * w));
    nh = snap(h * beta, [](double x) { return std::ceil(x); });
    nw = snap(w * beta, [](double x) { return std::ceil(x); });
  }
  return {nh, nw};
}

fs::path resized_path(const fs::path& original) {
  fs::path out = original;
  out.replace_filename(original.stem().string() + ".rsz" + original.extension().string());
  return out;
}

ImageRef apply_resize(const ImageRef& img, const ResizePolicy& policy, const fs::path& base_dir,
                      const fs::path& out_dir) {
  fs::path src = img.path_or_uri;
  if (src.is_relative() && !base_dir.empty()) src = base_dir / src;
  std::string bytes;
  try {
    bytes = util::read_file(src);
  } catch (const IoError&) {
    throw ValidationError("cannot read image " + img.path_or_uri);
  }
  std::vector<unsigned char> buf(bytes.begin(), bytes.end());
  cv::Mat mat = buf.empty() ? cv::Mat{} : cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw ValidationError("cannot decode image " + img.path_or_uri);

  const Dims target = smart_resize(mat.rows, mat.cols, policy);
  ImageRef out = img;
  if (target.height == mat.rows && target.width == mat.cols) {
    out.height = mat.rows;
    out.width = mat.cols;
    out.digest = util::sha256_hex(bytes);
    return out;
  }
  cv::Mat resized;
  cv::resize(mat, resized, cv::Size(static_cast<int>(target.width), static_cast<int>(target.height)));
  std::string ext = src.extension().string();
  if (ext.empty()) ext = ".png";
  std::vector<unsigned char> encoded;
  if (!cv::imencode(ext, resized, encoded)) throw ValidationError("cannot encode resized image " + img.path_or_uri);
  const std::string enc(encoded.begin(), encoded.end());
  fs::path dest = resized_path(src);
  if (!out_dir.empty())  // source digest prefix keeps same-named files from different folders apart
    dest = out_dir / (util::sha256_hex(bytes).substr(0, 16) + "-" + resized_path(src.filename()).string());
  util::write_file(dest, enc);

  out.path_or_uri = out_dir.empty() ? resized_path(fs::path(img.path_or_uri)).string() : dest.string();
  out.height = resized.rows;
  out.width = resized.cols;
  out.digest = util::sha256_hex(enc);
  return out;
}

}  // namespace tracemill::preprocess
