#include <cstdio>

int main() {
  std::puts("rbnet: placeholder, wired up with the harness module");
  return 0;
}
