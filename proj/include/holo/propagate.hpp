#pragma once

#include <vector>

#include "holo/field.hpp"

namespace holo {

// What to do with spatial frequencies beyond n/lambda. Zero keeps the
// propagation unitary on the propagating band; Decay applies the physical
// evanescent attenuation exp(-2*pi*|z|*sqrt(f^2 - (n/lambda)^2)).
enum class EvanescentMode { Zero, Decay };

struct TransferSpec {
    double z_um = 0.0;  // signed propagation distance; negative = back-propagation
    OpticalParams params;
    EvanescentMode evanescent_mode = EvanescentMode::Zero;

    void validate() const;
};

// Angular-spectrum transfer function H(fx, fy) on a w x h grid in wraparound
// frequency order. H = exp(i*2*pi*z*sqrt((n/lambda)^2 - fx^2 - fy^2)) on the
// propagating band.
ComplexField transfer_function(const TransferSpec& spec, int w, int h);

// Pure spectral propagation on the given grid: IDFT(DFT(u) * H). This is the
// operator applied on the padded grid inside propagate(); it is exactly
// unitary on the propagating band and is what the energy-conservation and
// composition properties refer to.
ComplexField spectral_propagate(const ComplexField& field, double z_um,
                                EvanescentMode mode = EvanescentMode::Zero);

// Free-space propagation by z_um with a wraparound guard: the field is
// padded to twice its linear size with its border mean, propagated
// spectrally, and cropped back.
ComplexField propagate(const ComplexField& field, double z_um,
                       EvanescentMode mode = EvanescentMode::Zero);

// sqrt of the background-normalized hologram taken as a zero-phase field,
// then propagated by -z_um. This is the network's input modality.
ComplexField back_propagate(const RealImage& hologram, double z_um, const OpticalParams& params,
                            EvanescentMode mode = EvanescentMode::Zero);

// back_propagate at each z in z_list (nonempty, strictly increasing).
std::vector<ComplexField> zscan(const RealImage& hologram, const std::vector<double>& z_list,
                                const OpticalParams& params,
                                EvanescentMode mode = EvanescentMode::Zero);

// Tamura coefficient sqrt(std(g)/mean(g)) of the gradient-magnitude image g.
// 0 for uniform images; invariant to positive rescaling; higher = sharper.
double focus_metric(const RealImage& img);

}  // namespace holo
