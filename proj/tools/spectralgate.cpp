#include <cstdio>

int main() {
    std::puts("spectralgate: placeholder");
    return 0;
}
