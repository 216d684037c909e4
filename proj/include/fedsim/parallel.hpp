#pragma once

namespace fedsim {

// Kernels that fan out over devices take an Exec argument. Serial is the
// reference path; Parallel uses OpenMP when available and must produce
// bit-identical results.
enum class Exec { Serial, Parallel };

int max_threads();

}  // namespace fedsim
