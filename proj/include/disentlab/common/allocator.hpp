#pragma once

namespace disentlab {

/// Keep freed heap memory mapped instead of returning it to the OS. Training
/// allocates and frees multi-megabyte batch buffers every step; with the
/// default glibc trim policy each one comes back as fresh zeroed pages.
void retain_heap_memory();

}  // namespace disentlab
