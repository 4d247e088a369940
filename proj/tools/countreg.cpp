#include "countreg/cli.hpp"

int main(int argc, char** argv) { return countreg::cli::run(argc, argv); }
