#pragma once

namespace crfconv {

/// Caps the OpenMP team size used by the library kernels. 0 restores the
/// runtime default. Results never depend on this value.
void set_num_threads(int threads);
int num_threads();

}  // namespace crfconv
