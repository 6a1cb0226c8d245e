#pragma once

// Independent naive-loop reference implementations used as oracles. These
// deliberately share no code with the library kernels.

#include <cmath>
#include <cstdint>
#include <vector>

namespace testsupport {

// Plain same-padded dilated 1-D convolution over [C_in][T] matrices.
inline std::vector<std::vector<double>> naive_conv1d_same(
    const std::vector<std::vector<double>>& input,
    const std::vector<std::vector<std::vector<double>>>& kernels,
    const std::vector<double>& bias, std::int64_t dilation) {
  const std::int64_t cin = static_cast<std::int64_t>(input.size());
  const std::int64_t tlen = static_cast<std::int64_t>(input[0].size());
  const std::int64_t cout = static_cast<std::int64_t>(kernels.size());
  const std::int64_t k = static_cast<std::int64_t>(kernels[0][0].size());
  const std::int64_t half = (k - 1) / 2;
  std::vector<std::vector<double>> out(
      cout, std::vector<double>(static_cast<std::size_t>(tlen), 0.0));
  for (std::int64_t oc = 0; oc < cout; ++oc)
    for (std::int64_t t = 0; t < tlen; ++t) {
      double acc = bias[static_cast<std::size_t>(oc)];
      for (std::int64_t ic = 0; ic < cin; ++ic)
        for (std::int64_t kk = 0; kk < k; ++kk) {
          const std::int64_t src = t + (kk - half) * dilation;
          if (src >= 0 && src < tlen)
            acc += input[ic][src] * kernels[oc][ic][kk];
        }
      out[oc][t] = acc;
    }
  return out;
}

}  // namespace testsupport
