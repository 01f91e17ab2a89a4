#include "ffdgan/gan_param.hpp"

#include "ffdgan/errors.hpp"

namespace ffdgan::param {

GanParameterization::GanParameterization(nn::GeneratorNet generator)
    : generator_(std::move(generator)) {
  if (!generator_.trained) throw StateError("gan parameterization: generator is not trained");
  space_ = DesignSpace::symmetric(generator_.latent_dim, 1.0);
}

geom::SurfaceGrid GanParameterization::decode(std::span<const double> z) const {
  space_.require(z);
  return generator_.decode(z);
}

}  // namespace ffdgan::param
