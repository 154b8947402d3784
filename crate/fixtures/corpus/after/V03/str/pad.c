#include "pad.h"

void fill_pad(char *out, int width) {
    int i;
    for (i = 0; i < width; i++) {
        out[i] = ' ';
    }
    out[width] = 0;
}
