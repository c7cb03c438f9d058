#include "kronsampler/instances.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "kronsampler/errors.hpp"
#include "kronsampler/frame_potential.hpp"

namespace kronsampler {

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, std::size_t trial, std::size_t mode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(mode)};
  return std::mt19937_64(seq);
}

}  // namespace

void validate_spec(const EnsembleSpec& spec) {
  if (spec.shapes.empty()) throw ValidationError("ensemble needs at least one mode shape");
  for (const auto& s : spec.shapes) {
    if (s.cols < 1 || s.rows <= s.cols) {
      throw ValidationError("mode shape " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                            " is not tall (need N > K >= 1)");
    }
  }
  if (spec.trials < 1) throw ValidationError("ensemble needs at least one trial");
}

std::vector<Matrix> gen_gaussian(const EnsembleSpec& spec, std::size_t trial) {
  validate_spec(spec);
  std::vector<Matrix> out;
  for (std::size_t r = 0; r < spec.shapes.size(); ++r) {
    auto rng = stream_for(spec.seed, trial, r);
    std::normal_distribution<double> normal;
    Matrix m(spec.shapes[r].rows, spec.shapes[r].cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Matrix> gen_sign_condition(const EnsembleSpec& spec, std::size_t trial) {
  validate_spec(spec);
  std::vector<Matrix> out;
  for (std::size_t r = 0; r < spec.shapes.size(); ++r) {
    auto rng = stream_for(spec.seed, trial, r);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution flip;
    Matrix m(spec.shapes[r].rows, spec.shapes[r].cols);
    while (true) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double sign = flip(rng) ? -1.0 : 1.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = sign * std::abs(normal(rng));
      }
      if (satisfies_sign_condition(FactorMatrix(m))) break;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Matrix> generate(const EnsembleSpec& spec, std::size_t trial) {
  return spec.kind == EnsembleKind::gaussian ? gen_gaussian(spec, trial) : gen_sign_condition(spec, trial);
}

nlohmann::json ensemble_spec_to_json(const EnsembleSpec& spec) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : spec.shapes) shapes.push_back({{"n", s.rows}, {"k", s.cols}});
  return {{"kind", spec.kind == EnsembleKind::gaussian ? "gaussian" : "signed"},
          {"shapes", shapes},
          {"seed", spec.seed},
          {"trials", spec.trials}};
}

EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j) {
  try {
    EnsembleSpec spec;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") {
      spec.kind = EnsembleKind::gaussian;
    } else if (kind == "signed" || kind == "sign-condition") {
      spec.kind = EnsembleKind::sign_condition;
    } else {
      throw ValidationError("unknown ensemble kind '" + kind + "'");
    }
    for (const auto& s : j.at("shapes")) spec.shapes.push_back({s.at("n").get<std::size_t>(), s.at("k").get<std::size_t>()});
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.trials = j.at("trials").get<std::size_t>();
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("ensemble spec JSON: ") + e.what());
  }
}

Matrix ImageInstance::approximation() const { return u1 * core * u2.transpose(); }

ImageInstance image_to_instance(const Matrix& pixels, std::size_t k1, std::size_t k2) {
  require_finite(pixels, "image");
  const auto h = static_cast<std::size_t>(pixels.rows());
  const auto w = static_cast<std::size_t>(pixels.cols());
  const std::size_t max_rank = std::min(h, w);
  if (k1 < 1 || k2 < 1 || k1 > max_rank || k2 > max_rank) {
    throw ValidationError("truncation ranks must lie in [1, " + std::to_string(max_rank) + "]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(pixels), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(h, w)) * std::numeric_limits<double>::epsilon() * s(0);

  ImageInstance inst;
  inst.pixels = pixels;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++inst.numerical_rank;
  }
  if (inst.numerical_rank == 0) throw DegenerateInputError("image is identically zero");
  inst.k1 = std::min(k1, inst.numerical_rank);
  inst.k2 = std::min(k2, inst.numerical_rank);
  inst.ranks_reduced = inst.k1 != k1 || inst.k2 != k2;

  const auto e1 = static_cast<Eigen::Index>(inst.k1);
  const auto e2 = static_cast<Eigen::Index>(inst.k2);
  const Vector root = s.head(std::max(e1, e2)).cwiseSqrt();
  inst.u1 = svd.matrixU().leftCols(e1) * root.head(e1).asDiagonal();
  inst.u2 = svd.matrixV().leftCols(e2) * root.head(e2).asDiagonal();
  inst.core = Matrix::Identity(e1, e2);
  return inst;
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_count(const std::string& tok, const char* what) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    throw ValidationError(std::string("PGM: bad ") + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace

Matrix read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P2" && magic != "P5") throw ValidationError("PGM: unsupported magic '" + magic + "'");
  const std::size_t w = parse_count(next_token(in), "width");
  const std::size_t h = parse_count(next_token(in), "height");
  const std::size_t maxval = parse_count(next_token(in), "maxval");
  if (w == 0 || h == 0) throw ValidationError("PGM: empty image");
  if (maxval == 0 || maxval > 255) throw ValidationError("PGM: maxval must be in [1, 255]");

  Matrix m(h, w);
  if (magic == "P5") {
    std::vector<unsigned char> buf(w * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ValidationError("PGM: truncated pixel data");
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[i * w + j];
    }
  } else {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t v = parse_count(next_token(in), "pixel");
        if (v > maxval) throw ValidationError("PGM: pixel above maxval");
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(v);
      }
    }
  }
  return m;
}

void write_pgm(const std::filesystem::path& path, const Matrix& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "P5\n" << pixels.cols() << ' ' << pixels.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < pixels.rows(); ++i) {
    for (Eigen::Index j = 0; j < pixels.cols(); ++j) {
      const double v = std::isfinite(pixels(i, j)) ? std::clamp(std::round(pixels(i, j)), 0.0, 255.0) : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(v)));
    }
  }
  if (!out) throw ValidationError("write failed for " + path.string());
}

Matrix synthetic_test_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  if (height == 0 || width == 0) throw ValidationError("test image must be non-empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);

  Matrix img(height, width);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double y = static_cast<double>(i) / h;
      const double x = static_cast<double>(j) / w;
      img(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 60.0 + 50.0 * x + 30.0 * y;
    }
  }

  struct Blob {
    double cy, cx, ry, rx, amp, tilt;
  };
  std::vector<Blob> blobs;
  for (int b = 0; b < 14; ++b) {
    blobs.push_back({unit(rng), unit(rng), 0.04 + 0.14 * unit(rng), 0.04 + 0.14 * unit(rng),
                     (unit(rng) < 0.7 ? 1.0 : -1.0) * (40.0 + 90.0 * unit(rng)), 3.14159 * unit(rng)});
  }
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double y = static_cast<double>(i) / h;
      const double x = static_cast<double>(j) / w;
      double v = 0.0;
      for (const auto& b : blobs) {
        const double c = std::cos(b.tilt);
        const double s = std::sin(b.tilt);
        const double dy = ((y - b.cy) * c - (x - b.cx) * s) / b.ry;
        const double dx = ((y - b.cy) * s + (x - b.cx) * c) / b.rx;
        const double d2 = dx * dx + dy * dy;
        // shaded disc with a soft rim, like a glossy round object
        v += b.amp * (1.0 - 0.35 * dx) / (1.0 + std::exp(12.0 * (d2 - 1.0)));
      }
      v += 6.0 * std::sin(37.0 * x + 11.0 * y) * std::cos(23.0 * y);
      img(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
    }
  }
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  img = ((img.array() - lo) * (255.0 / (hi - lo))).round();
  return img;
}

}  // namespace kronsampler
