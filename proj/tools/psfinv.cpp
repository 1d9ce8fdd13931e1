#include "psfinv/cli.hpp"

int main(int argc, char** argv) { return psfinv::cli::dispatch(argc, argv); }
