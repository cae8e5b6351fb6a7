#pragma once

namespace vild {

// Thread cap for every OpenMP kernel in the library.
int max_threads();
void set_max_threads(int threads);

// Applies VILD_THREADS if set to a positive integer; returns the active cap.
int apply_thread_env();

}  // namespace vild
