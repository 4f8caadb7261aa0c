#include "ihmm/cli.hpp"

int main(int argc, char** argv) { return ihmm::run_cli(argc, argv); }
