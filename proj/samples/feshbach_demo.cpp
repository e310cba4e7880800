// Fixed points of the effective Hamiltonian of a small symmetric matrix,
// compared with its full spectrum.

#include <cstdio>

#include "edham/feshbach.hpp"

int main() {
  edham::Matrix H(4, 4);
  H << 1.0, 0.4, 0.0, 0.2,
       0.4, 2.0, 0.3, 0.0,
       0.0, 0.3, 3.0, 0.5,
       0.2, 0.0, 0.5, 4.0;
  const auto part = edham::make_partition(H, {0, 1});
  const auto spec = edham::selfconsistent_spectrum(edham::make_effective(part));
  const auto full = edham::spectral_decompose(H).values;
  const auto e = spec.energies();
  for (std::size_t k = 0; k < e.size(); ++k)
    std::printf("%zu  fixed point %.15f  eigenvalue %.15f\n", k, e[k], full(static_cast<edham::Index>(k)));
  return 0;
}
