#pragma once

namespace nudiff {

// Every batch kernel has a serial reference implementation; the parallel
// path must produce bit-identical results (per-item substreams, fixed-order
// reductions). Tests compare the two, par_bench times them.
enum class Exec { Serial, Parallel };

}  // namespace nudiff
