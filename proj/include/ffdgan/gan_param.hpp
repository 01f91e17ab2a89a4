#pragma once

#include "ffdgan/neural.hpp"
#include "ffdgan/parameterization.hpp"

namespace ffdgan::param {

// Latent space of a trained generator, each variable in [-1, 1].
class GanParameterization final : public Parameterization {
 public:
  // Throws StateError when the generator has not been trained.
  explicit GanParameterization(nn::GeneratorNet generator);

  std::string kind() const override { return "gan"; }
  const DesignSpace& space() const override { return space_; }
  geom::SurfaceGrid decode(std::span<const double> z) const override;

  const nn::GeneratorNet& generator() const { return generator_; }

 private:
  nn::GeneratorNet generator_;
  DesignSpace space_;
};

}  // namespace ffdgan::param
