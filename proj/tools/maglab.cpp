#include "maglab/cli_app.hpp"

int main(int argc, char** argv) { return maglab::run_cli(argc, argv); }
