#include "instrans/cli.hpp"

int main(int argc, char** argv) { return instrans::run_cli(argc, argv); }
