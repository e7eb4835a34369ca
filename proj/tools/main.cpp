#include "jointmodel/cli.h"

int main(int argc, char** argv)
{
    return jointmodel::cli_dispatch(argc, argv);
}
