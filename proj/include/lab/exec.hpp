#pragma once

namespace lab {

/// Execution mode for the data-parallel backups. Serial is the reference
/// implementation; Parallel distributes states across OpenMP threads. Both
/// run the same per-entry arithmetic in the same order, so results are
/// bitwise identical.
enum class Exec { Serial, Parallel };

} // namespace lab
