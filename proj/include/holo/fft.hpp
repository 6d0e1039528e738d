#pragma once

#include <complex>
#include <vector>

namespace holo {

// 2D DFT with the project-wide convention: forward has a negative exponent
// and no scaling, inverse has a positive exponent and carries 1/(w*h).
// Backed by FFTW (double precision, single-threaded); plans are cached per
// shape behind a mutex, so callers may transform from many threads.
void fft2(std::vector<std::complex<double>>& data, int width, int height);
void ifft2(std::vector<std::complex<double>>& data, int width, int height);

// Signed wraparound frequency index: 0, 1, ..., then negative.
inline int freq_index(int i, int n) { return i < (n + 1) / 2 ? i : i - n; }

}  // namespace holo
