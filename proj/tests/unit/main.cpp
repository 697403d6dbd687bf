#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "disentlab/common/allocator.hpp"

int main(int argc, char** argv) {
  disentlab::retain_heap_memory();
  doctest::Context context(argc, argv);
  return context.run();
}
