#include "anscale/generators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anscale/error.hpp"
#include "anscale/parallel.hpp"

namespace anscale {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::domain, what);
}

void check_J(double J) { require(J > 0.0 && J < 1.0, "J must lie in (0, 1)"); }
void check_L(double L) { require(L >= 0.5 && L < 1.0, "L must lie in [1/2, 1)"); }
void check_M(double M) { require(M > 0.0 && M < 1.0, "M must lie in (0, 1)"); }

double fgn_autocovariance(double J, std::size_t k) {
  const double kk = static_cast<double>(k);
  const double e = 2.0 * J;
  return 0.5 * (std::pow(kk + 1.0, e) - 2.0 * std::pow(kk, e) + std::pow(std::abs(kk - 1.0), e));
}

// Circulant embedding of the fGn covariance; eigenvalues computed once.
class FgnSynth {
 public:
  FgnSynth(double J, std::size_t n) : n_(n) {
    check_J(J);
    half_ = fft_friendly_size(std::max<std::size_t>(n > 0 ? n - 1 : 1, 1));
    const std::size_t size = 2 * half_;
    RealFft fft(size);
    auto row = fft.real();
    double abs_sum = 0.0;
    for (std::size_t k = 0; k <= half_; ++k) {
      row[k] = fgn_autocovariance(J, k);
      abs_sum += std::abs(row[k]);
    }
    for (std::size_t k = 1; k < half_; ++k) row[size - k] = row[k];
    fft.forward();
    const auto spec = fft.spectrum();
    scale_.resize(half_ + 1);
    // Values inside this band are FFT rounding noise around zero, anything
    // below it is a genuinely indefinite embedding.
    const double tol = 1e-10 * abs_sum;
    for (std::size_t k = 0; k <= half_; ++k) {
      const double lambda = spec[k].real();
      if (lambda < -tol) {
        throw Error(Errc::negative_eigenvalue,
                    "circulant embedding has eigenvalue " + std::to_string(lambda) + " at k=" +
                        std::to_string(k));
      }
      const double l = std::max(lambda, 0.0);
      const bool edge = (k == 0 || k == half_);
      scale_[k] = std::sqrt(l / (edge ? 1.0 : 2.0) / static_cast<double>(size));
    }
  }

  std::size_t fft_size() const noexcept { return 2 * half_; }

  void synthesize(RngStream& stream, std::span<double> out, RealFft& fft) const {
    auto spec = fft.spectrum();
    spec[0] = {scale_[0] * stream.gaussian(), 0.0};
    for (std::size_t k = 1; k < half_; ++k) {
      const double re = stream.gaussian();
      const double im = stream.gaussian();
      spec[k] = {scale_[k] * re, scale_[k] * im};
    }
    spec[half_] = {scale_[half_] * stream.gaussian(), 0.0};
    fft.inverse();
    const auto real = fft.real();
    std::copy_n(real.begin(), n_, out.begin());
  }

 private:
  std::size_t n_;
  std::size_t half_ = 1;
  std::vector<double> scale_;
};

// Moving average of fine-mesh stable noise with the fractional kernel,
// evaluated by FFT convolution and subsampled at unit times.
class FlmSynth {
 public:
  FlmSynth(double J, double L, std::size_t n, int mesh, int window)
      : sampler_(L), n_(n), mesh_(static_cast<std::size_t>(mesh)),
        window_(static_cast<std::size_t>(window)) {
    check_J(J);
    require(mesh >= 1, "FLM mesh must be >= 1");
    require(window >= 0, "FLM window must be >= 0");
    if (window_ == 0) window_ = static_cast<std::size_t>(kFlmAutoWindowPaths) * n_ * mesh_;
    fine_len_ = window_ + mesh_ * (n_ - 1);
    size_ = fft_friendly_size(fine_len_);

    const double d = J - 0.5;
    const double m = static_cast<double>(mesh_);
    const double norm = std::pow(m, -d - L) / std::tgamma(J + 0.5);
    auto pos_pow = [d](double x) { return x > 0.0 ? std::pow(x, d) : 0.0; };

    RealFft fft(size_);
    auto kernel = fft.real();
    std::fill(kernel.begin(), kernel.end(), 0.0);
    for (std::size_t j = 1; j <= window_; ++j) {
      const double x = static_cast<double>(j);
      kernel[j - 1] = norm * (pos_pow(x) - pos_pow(x - m));
    }
    fft.forward();
    const auto spec = fft.spectrum();
    kernel_spectrum_.assign(spec.begin(), spec.end());
    for (auto& c : kernel_spectrum_) c /= static_cast<double>(size_);
  }

  std::size_t fft_size() const noexcept { return size_; }

  void synthesize(RngStream& stream, std::span<double> out, RealFft& fft) const {
    auto real = fft.real();
    for (std::size_t i = 0; i < fine_len_; ++i) real[i] = sampler_(stream);
    std::fill(real.begin() + static_cast<std::ptrdiff_t>(fine_len_), real.end(), 0.0);
    fft.forward();
    auto spec = fft.spectrum();
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= kernel_spectrum_[k];
    fft.inverse();
    // conv[i] only reaches back window-1 samples, so indices >= window-1
    // are free of circular wrap-around.
    for (std::size_t t = 0; t < n_; ++t) out[t] = real[window_ - 1 + mesh_ * t];
  }

 private:
  StableSampler sampler_;
  std::size_t n_;
  std::size_t mesh_;
  std::size_t window_;
  std::size_t fine_len_ = 0;
  std::size_t size_ = 1;
  std::vector<std::complex<double>> kernel_spectrum_;
};

std::vector<double> moses_table(double M, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = std::pow(static_cast<double>(k + 1), M - 0.5);
  return w;
}

std::vector<double> sbm_sd_table(double M, std::size_t n) {
  std::vector<double> sd(n);
  const double e = 2.0 * M;
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    sd[k] = std::sqrt((std::pow(kk + 1.0, e) - std::pow(kk, e)) / e);
  }
  return sd;
}

// Per fine step j (time t = j h, j >= 1): sqrt(t^(2H-1) D0 h) and t^(-H).
struct VdpTables {
  std::vector<double> amplitude;
  std::vector<double> inv_scale;
  double epsilon = 1.0;
  std::size_t substeps = 1;
  VdpShape shape = VdpShape::bi_exponential;

  VdpTables(double H, double eps, std::size_t n, std::size_t s, VdpShape sh)
      : epsilon(eps), substeps(s), shape(sh) {
    require(H > 0.0 && H < 1.0, "H must lie in (0, 1)");
    require(eps > 0.0, "epsilon must be > 0");
    require(s >= 1, "substeps must be >= 1");
    const double h = 1.0 / static_cast<double>(s);
    const double d0 = 2.0 * H / (eps * eps);
    const std::size_t fine = n * s;
    amplitude.resize(fine);
    inv_scale.resize(fine);
    for (std::size_t j = 1; j < fine; ++j) {
      const double t = static_cast<double>(j) * h;
      amplitude[j] = std::sqrt(std::pow(t, 2.0 * H - 1.0) * d0 * h);
      inv_scale[j] = std::pow(t, -H);
    }
  }

  void synthesize(RngStream& stream, std::span<double> out) const {
    // X(h) = 0; each fine step uses the diffusion at its left endpoint.
    double x = 0.0;
    double prev_unit = 0.0;
    std::size_t j = 1;
    for (std::size_t t = 0; t < out.size(); ++t) {
      const std::size_t stop = (t + 1) * substeps;
      if (shape == VdpShape::bi_exponential) {
        for (; j < stop; ++j) {
          const double u = std::abs(x) * inv_scale[j];
          x += amplitude[j] * std::sqrt(1.0 + epsilon * u) * stream.gaussian();
        }
      } else {
        for (; j < stop; ++j) x += amplitude[j] * stream.gaussian();
      }
      out[t] = x - prev_unit;
      prev_unit = x;
    }
  }
};

}  // namespace

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::BM: return "BM";
    case Family::SBM: return "SBM";
    case Family::FBM: return "FBM";
    case Family::SFBM: return "SFBM";
    case Family::LM: return "LM";
    case Family::SLM: return "SLM";
    case Family::FLM: return "FLM";
    case Family::SFLM: return "SFLM";
    case Family::VDP: return "VDP";
  }
  return "?";
}

Family family_from_string(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto f : {Family::BM, Family::SBM, Family::FBM, Family::SFBM, Family::LM, Family::SLM,
                 Family::FLM, Family::SFLM, Family::VDP}) {
    if (to_string(f) == upper) return f;
  }
  throw Error(Errc::family_mismatch, "unknown process family '" + std::string(name) + "'");
}

ProcessSpec ProcessSpec::bm() { return ProcessSpec{}; }

ProcessSpec ProcessSpec::sbm(double M) {
  ProcessSpec s;
  s.family = Family::SBM;
  s.M = M;
  return s;
}

ProcessSpec ProcessSpec::fbm(double J) {
  ProcessSpec s;
  s.family = Family::FBM;
  s.J = J;
  return s;
}

ProcessSpec ProcessSpec::sfbm(double J, double M) {
  ProcessSpec s;
  s.family = Family::SFBM;
  s.J = J;
  s.M = M;
  return s;
}

ProcessSpec ProcessSpec::lm(double L) {
  ProcessSpec s;
  s.family = Family::LM;
  s.L = L;
  return s;
}

ProcessSpec ProcessSpec::slm(double L, double M) {
  ProcessSpec s;
  s.family = Family::SLM;
  s.L = L;
  s.M = M;
  return s;
}

ProcessSpec ProcessSpec::flm(double J, double L, int mesh, int window) {
  ProcessSpec s;
  s.family = Family::FLM;
  s.J = J;
  s.L = L;
  s.flm_mesh = mesh;
  s.flm_window = window;
  return s;
}

ProcessSpec ProcessSpec::sflm(double J, double L, double M, int mesh, int window) {
  ProcessSpec s = flm(J, L, mesh, window);
  s.family = Family::SFLM;
  s.M = M;
  return s;
}

ProcessSpec ProcessSpec::vdp(double H, double epsilon, int substeps, VdpShape shape) {
  ProcessSpec s;
  s.family = Family::VDP;
  s.H = H;
  s.epsilon = epsilon;
  s.vdp_substeps = substeps;
  s.vdp_shape = shape;
  return s;
}

void ProcessSpec::validate() const {
  const bool wants_J = family == Family::FBM || family == Family::SFBM ||
                       family == Family::FLM || family == Family::SFLM;
  const bool wants_L = family == Family::LM || family == Family::SLM || family == Family::FLM ||
                       family == Family::SFLM;
  const bool wants_M = family == Family::SBM || family == Family::SFBM ||
                       family == Family::SLM || family == Family::SFLM;
  const bool wants_H = family == Family::VDP;
  const bool wants_flm = family == Family::FLM || family == Family::SFLM;

  auto check_presence = [&](bool wanted, bool present, const char* field) {
    if (wanted && !present) {
      throw Error(Errc::family_mismatch,
                  std::string(to_string(family)) + " requires " + field);
    }
    if (!wanted && present) {
      throw Error(Errc::family_mismatch,
                  std::string(field) + " does not apply to " + std::string(to_string(family)));
    }
  };
  check_presence(wants_J, J.has_value(), "J");
  check_presence(wants_L, L.has_value(), "L");
  check_presence(wants_M, M.has_value(), "M");
  check_presence(wants_H, H.has_value(), "H");
  check_presence(wants_H, epsilon.has_value(), "epsilon");
  check_presence(wants_H, vdp_substeps.has_value(), "vdp substeps");
  check_presence(wants_H, vdp_shape.has_value(), "vdp shape");
  check_presence(wants_flm, flm_mesh.has_value(), "FLM mesh");
  check_presence(wants_flm, flm_window.has_value(), "FLM window");

  if (J) check_J(*J);
  if (L) check_L(*L);
  if (M) check_M(*M);
  if (H) require(*H > 0.0 && *H < 1.0, "H must lie in (0, 1)");
  if (epsilon) require(*epsilon > 0.0, "epsilon must be > 0");
  if (vdp_substeps) require(*vdp_substeps >= 1, "VDP substeps must be >= 1");
  if (flm_mesh) require(*flm_mesh >= 1, "FLM mesh must be >= 1");
  if (flm_window) require(*flm_window >= 0, "FLM window must be >= 0");
}

bool ProcessSpec::rs_unreliable() const noexcept {
  return (family == Family::FLM || family == Family::SFLM) && J && *J < 0.5;
}

ProcessSpec::Exponents ProcessSpec::theoretical_exponents() const {
  validate();
  const double j = J.value_or(0.5);
  const double l = L.value_or(0.5);
  if (family == Family::VDP) return {0.5, 0.5, *H, *H};
  const double m = M.value_or(0.5);
  return {j, l, m, j + l + m - 1.0};
}

std::string ProcessSpec::label() const {
  std::ostringstream os;
  os << to_string(family);
  std::vector<std::string> parts;
  auto add = [&](const char* name, const std::optional<double>& v) {
    if (v) {
      std::ostringstream p;
      p << name << '=' << *v;
      parts.push_back(p.str());
    }
  };
  add("J", J);
  add("L", L);
  add("M", M);
  add("H", H);
  if (!parts.empty()) {
    os << '(';
    for (std::size_t i = 0; i < parts.size(); ++i) os << (i ? ", " : "") << parts[i];
    os << ')';
  }
  return os.str();
}

std::string ProcessSpec::to_json() const {
  nlohmann::json j;
  j["family"] = std::string(to_string(family));
  if (J) j["J"] = *J;
  if (L) j["L"] = *L;
  if (M) j["M"] = *M;
  if (H) j["H"] = *H;
  if (epsilon) j["epsilon"] = *epsilon;
  if (flm_mesh) j["flm_mesh"] = *flm_mesh;
  if (flm_window) j["flm_window"] = *flm_window;
  if (vdp_substeps) j["vdp_substeps"] = *vdp_substeps;
  if (vdp_shape) j["vdp_shape"] = *vdp_shape == VdpShape::constant ? "constant" : "bi_exponential";
  if (rs_unreliable()) j["rs_unreliable"] = true;
  return j.dump();
}

ProcessSpec ProcessSpec::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format, std::string("bad process descriptor: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family")) {
    throw Error(Errc::format, "process descriptor lacks a family");
  }
  ProcessSpec s;
  s.family = family_from_string(j.at("family").get<std::string>());
  auto opt_d = [&](const char* key) -> std::optional<double> {
    return j.contains(key) ? std::optional<double>(j.at(key).get<double>()) : std::nullopt;
  };
  auto opt_i = [&](const char* key) -> std::optional<int> {
    return j.contains(key) ? std::optional<int>(j.at(key).get<int>()) : std::nullopt;
  };
  s.J = opt_d("J");
  s.L = opt_d("L");
  s.M = opt_d("M");
  s.H = opt_d("H");
  s.epsilon = opt_d("epsilon");
  s.flm_mesh = opt_i("flm_mesh");
  s.flm_window = opt_i("flm_window");
  s.vdp_substeps = opt_i("vdp_substeps");
  if (j.contains("vdp_shape")) {
    s.vdp_shape = j.at("vdp_shape").get<std::string>() == "constant" ? VdpShape::constant
                                                                     : VdpShape::bi_exponential;
  }
  return s;
}

std::vector<double> fgn(double J, std::size_t n, RngStream& stream) {
  check_J(J);
  if (n == 0) return {};
  FgnSynth synth(J, n);
  RealFft fft(synth.fft_size());
  std::vector<double> out(n);
  synth.synthesize(stream, out, fft);
  return out;
}

std::vector<double> stable_noise(double L, std::size_t n, RngStream& stream) {
  const StableSampler sampler(L);
  std::vector<double> out(n);
  for (auto& v : out) v = sampler(stream);
  return out;
}

std::vector<double> flm_increments(double J, double L, std::size_t n, RngStream& stream,
                                   int mesh, int window) {
  check_L(L);
  check_J(J);
  if (n == 0) return {};
  FlmSynth synth(J, L, n, mesh, window);
  RealFft fft(synth.fft_size());
  std::vector<double> out(n);
  synth.synthesize(stream, out, fft);
  return out;
}

std::vector<double> moses_weights(std::span<const double> increments, double M) {
  check_M(M);
  const auto w = moses_table(M, increments.size());
  std::vector<double> out(increments.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = increments[k] * w[k];
  return out;
}

std::vector<double> sbm_exact_increments(double M, std::size_t n, RngStream& stream) {
  check_M(M);
  const auto sd = sbm_sd_table(M, n);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = sd[k] * stream.gaussian();
  return out;
}

std::vector<double> vdp_path(double H, double epsilon, std::size_t n, int substeps,
                             RngStream& stream, VdpShape shape) {
  require(substeps >= 1, "substeps must be >= 1");
  const VdpTables tables(H, epsilon, n, static_cast<std::size_t>(substeps), shape);
  std::vector<double> out(n);
  tables.synthesize(stream, out);
  return out;
}

struct PathGenerator::Impl {
  std::optional<FgnSynth> fgn;
  std::optional<FlmSynth> flm;
  std::optional<VdpTables> vdp;
  std::optional<StableSampler> stable;
  std::vector<double> weights;  // Moses weights, or SBM standard deviations
};

PathGenerator::PathGenerator(ProcessSpec spec, std::size_t n_steps, std::uint64_t master_seed)
    : spec_(std::move(spec)), n_steps_(n_steps), master_seed_(master_seed),
      impl_(std::make_unique<Impl>()) {
  spec_.validate();
  if (n_steps_ == 0) throw Error(Errc::invalid_range, "n_steps must be >= 1");
  switch (spec_.family) {
    case Family::BM:
      impl_->weights = sbm_sd_table(0.5, n_steps_);
      break;
    case Family::SBM:
      impl_->weights = sbm_sd_table(*spec_.M, n_steps_);
      break;
    case Family::FBM:
    case Family::SFBM:
      impl_->fgn.emplace(*spec_.J, n_steps_);
      break;
    case Family::LM:
    case Family::SLM:
      impl_->stable.emplace(*spec_.L);
      break;
    case Family::FLM:
    case Family::SFLM:
      impl_->flm.emplace(*spec_.J, *spec_.L, n_steps_, *spec_.flm_mesh, *spec_.flm_window);
      break;
    case Family::VDP:
      impl_->vdp.emplace(*spec_.H, *spec_.epsilon, n_steps_,
                         static_cast<std::size_t>(*spec_.vdp_substeps), *spec_.vdp_shape);
      break;
  }
  if (spec_.family == Family::SFBM || spec_.family == Family::SLM ||
      spec_.family == Family::SFLM) {
    impl_->weights = moses_table(*spec_.M, n_steps_);
  }
}

PathGenerator::~PathGenerator() = default;
PathGenerator::PathGenerator(PathGenerator&&) noexcept = default;
PathGenerator& PathGenerator::operator=(PathGenerator&&) noexcept = default;

PathGenerator::Workspace PathGenerator::make_workspace() const {
  Workspace ws;
  if (impl_->fgn) ws.fft.emplace(impl_->fgn->fft_size());
  if (impl_->flm) ws.fft.emplace(impl_->flm->fft_size());
  return ws;
}

void PathGenerator::generate(std::size_t path, std::span<double> out, Workspace& ws) const {
  if (out.size() != n_steps_) throw Error(Errc::invalid_range, "output span has wrong length");
  RngStream stream(master_seed_, path);
  switch (spec_.family) {
    case Family::BM:
    case Family::SBM:
      for (std::size_t k = 0; k < n_steps_; ++k) out[k] = impl_->weights[k] * stream.gaussian();
      return;
    case Family::FBM:
    case Family::SFBM:
      impl_->fgn->synthesize(stream, out, *ws.fft);
      break;
    case Family::LM:
    case Family::SLM:
      for (auto& v : out) v = (*impl_->stable)(stream);
      break;
    case Family::FLM:
    case Family::SFLM:
      impl_->flm->synthesize(stream, out, *ws.fft);
      break;
    case Family::VDP:
      impl_->vdp->synthesize(stream, out);
      return;
  }
  if (!impl_->weights.empty()) {
    for (std::size_t k = 0; k < n_steps_; ++k) out[k] *= impl_->weights[k];
  }
}

PathEnsemble generate(const ProcessSpec& spec, std::size_t n_paths, std::size_t n_steps,
                      std::uint64_t master_seed, std::size_t threads) {
  if (n_paths == 0 || n_steps == 0) {
    throw Error(Errc::invalid_range, "n_paths and n_steps must be >= 1");
  }
  const PathGenerator gen(spec, n_steps, master_seed);
  PathEnsemble ensemble(n_paths, n_steps, gen.descriptor(), master_seed);
  threads = std::max<std::size_t>(1, std::min(threads, n_paths));
  std::vector<PathGenerator::Workspace> workspaces;
  workspaces.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) workspaces.push_back(gen.make_workspace());
  parallel_for(n_paths, threads, [&](std::size_t p, std::size_t w) {
    gen.generate(p, ensemble.row(p), workspaces[w]);
  });
  return ensemble;
}

}  // namespace anscale
