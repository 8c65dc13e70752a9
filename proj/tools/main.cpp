#include "kanfric/cli.hpp"

int main(int argc, char** argv) { return kanfric::run_cli(argc, argv); }
