#pragma once

namespace intraday {

// Selects the serial reference loop or the OpenMP loop of a batch kernel.
// Both paths produce bit-identical results.
enum class Exec { serial, parallel };

// Thread count used by Exec::parallel kernels; <= 0 leaves the OpenMP default.
void set_parallelism(int threads);
int parallelism();

}  // namespace intraday
