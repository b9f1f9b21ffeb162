#include "ocl/cli.hpp"

int main(int argc, char** argv) { return ocl::cli::main(argc, argv); }
