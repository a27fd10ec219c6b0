#include "pancolor/cli.hpp"

int main(int argc, char** argv) { return pancolor::cli::dispatch(argc, argv); }
