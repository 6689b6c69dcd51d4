#include "riskconv/cli.hpp"

#include <cstdio>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    const riskconv::CliResult res = riskconv::run_cli(args);
    std::fputs(res.out.c_str(), stdout);
    return res.exit_code;
}
