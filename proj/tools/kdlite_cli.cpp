#include "kdlite/harness/cli.hpp"

int main(int argc, char** argv) { return kdlite::harness::run_cli(argc, argv); }
