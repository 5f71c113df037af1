#include "diffss/cli.hpp"

int main(int argc, char** argv) { return diffss::run_cli(argc, argv); }
