#include "fcs/harness.hpp"

int main(int argc, char** argv) { return fcs::cli_main(argc, argv); }
