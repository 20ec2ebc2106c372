#include "cli.hpp"

int main(int argc, char** argv) { return cogload::cli::dispatch(argc, argv); }
