#include "fdvn/cli.hpp"

int main(int argc, char** argv) { return fdvn::cli::run(argc, argv, std::cout, std::cerr); }
