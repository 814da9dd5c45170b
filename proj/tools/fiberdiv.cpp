#include "fiberdiv/cli.hpp"

int main(int argc, char** argv) { return fiberdiv::cli::run(argc, argv); }
