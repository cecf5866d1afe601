#include "kgfuse/cli.hpp"

int main(int argc, char** argv) { return kgfuse::cli::run(argc, argv); }
