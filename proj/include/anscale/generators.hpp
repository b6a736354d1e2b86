#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anscale/core.hpp"
#include "anscale/fft.hpp"
#include "anscale/rng.hpp"

namespace anscale {

enum class Family { BM, SBM, FBM, SFBM, LM, SLM, FLM, SFLM, VDP };

std::string_view to_string(Family f) noexcept;
Family family_from_string(std::string_view name);

enum class VdpShape { bi_exponential, constant };

inline constexpr int kDefaultFlmMesh = 4;
/// A kernel window of 0 fine steps means kFlmAutoWindowPaths path lengths.
/// The kernel tail decays slowly, so a window of a few hundred unit steps
/// visibly flattens the scaling of long paths.
inline constexpr int kFlmAutoWindow = 0;
inline constexpr int kFlmAutoWindowPaths = 4;
inline constexpr int kDefaultVdpSubsteps = 16;

/// Process family plus the exponents that are meaningful for it. Fields that
/// do not apply to the family stay empty.
struct ProcessSpec {
  Family family = Family::BM;
  std::optional<double> J, L, M, H;
  std::optional<double> epsilon;
  std::optional<int> flm_mesh;
  std::optional<int> flm_window;
  std::optional<int> vdp_substeps;
  std::optional<VdpShape> vdp_shape;

  static ProcessSpec bm();
  static ProcessSpec sbm(double M);
  static ProcessSpec fbm(double J);
  static ProcessSpec sfbm(double J, double M);
  static ProcessSpec lm(double L);
  static ProcessSpec slm(double L, double M);
  static ProcessSpec flm(double J, double L, int mesh = kDefaultFlmMesh,
                         int window = kFlmAutoWindow);
  static ProcessSpec sflm(double J, double L, double M, int mesh = kDefaultFlmMesh,
                          int window = kFlmAutoWindow);
  static ProcessSpec vdp(double H, double epsilon = 1.0, int substeps = kDefaultVdpSubsteps,
                         VdpShape shape = VdpShape::bi_exponential);

  /// Throws family-mismatch when a required field is missing or an
  /// inapplicable one is set, domain-error when a value is out of range.
  void validate() const;

  /// R/S is meaningless for fractional Levy noise with J < 1/2.
  bool rs_unreliable() const noexcept;

  /// Theoretical (J, L, M, H) of the family.
  struct Exponents {
    double J, L, M, H;
  };
  Exponents theoretical_exponents() const;

  std::string label() const;
  std::string to_json() const;
  static ProcessSpec from_json(std::string_view text);
};

// Single-sequence building blocks. Each takes its own stream and may be
// called independently of any ensemble.

/// Exact fractional Gaussian noise by circulant embedding.
std::vector<double> fgn(double J, std::size_t n, RngStream& stream);

std::vector<double> stable_noise(double L, std::size_t n, RngStream& stream);

/// Approximate fractional Levy noise: truncated moving average of stable noise
/// on a mesh refined by `mesh`, kernel window `window` fine steps (0: auto).
std::vector<double> flm_increments(double J, double L, std::size_t n, RngStream& stream,
                                   int mesh, int window);

/// k-th increment times (k + 1)^(M - 1/2).
std::vector<double> moses_weights(std::span<const double> increments, double M);

/// Independent Gaussian increments with Var = ((k+1)^(2M) - k^(2M)) / (2M).
std::vector<double> sbm_exact_increments(double M, std::size_t n, RngStream& stream);

/// Euler-Maruyama path of the variable diffusion process, sampled at unit times.
std::vector<double> vdp_path(double H, double epsilon, std::size_t n, int substeps,
                             RngStream& stream, VdpShape shape = VdpShape::bi_exponential);

/// Precomputes everything shared between paths of one ensemble (circulant
/// eigenvalues, kernel spectra, weight tables) and emits path p on demand
/// from stream (master_seed, p). Thread-safe: all mutable state lives in
/// the caller-owned Workspace.
class PathGenerator {
 public:
  PathGenerator(ProcessSpec spec, std::size_t n_steps, std::uint64_t master_seed);
  ~PathGenerator();
  PathGenerator(PathGenerator&&) noexcept;
  PathGenerator& operator=(PathGenerator&&) noexcept;

  struct Workspace {
    std::optional<RealFft> fft;
  };
  Workspace make_workspace() const;

  void generate(std::size_t path, std::span<double> out, Workspace& ws) const;

  const ProcessSpec& spec() const noexcept { return spec_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::string descriptor() const { return spec_.to_json(); }

 private:
  struct Impl;
  ProcessSpec spec_;
  std::size_t n_steps_;
  std::uint64_t master_seed_;
  std::unique_ptr<Impl> impl_;
};

PathEnsemble generate(const ProcessSpec& spec, std::size_t n_paths, std::size_t n_steps,
                      std::uint64_t master_seed, std::size_t threads = 1);

}  // namespace anscale
