#include "pica/harness.hpp"

int main(int argc, char** argv) { return pica::harness::run_cli(argc, argv); }
