#include "cli.hpp"

int main(int argc, char** argv) { return fga::cli::run(argc, argv); }
