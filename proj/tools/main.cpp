#include "cli.hpp"

int main(int argc, char** argv) { return warpgeo::cli::run(argc, argv); }
