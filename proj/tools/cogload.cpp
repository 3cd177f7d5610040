#include "cogload/commands.hpp"

int main(int argc, char** argv) { return cogload::run_cli(argc, argv); }
