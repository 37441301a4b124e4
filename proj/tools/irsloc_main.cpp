#include <cstdio>

int main() {
    std::puts("irsloc: placeholder");
    return 0;
}
