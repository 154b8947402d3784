#include "scale.h"
#define CAP 1000000L

long scale_mul(long v, long d) {
    v = v * d;
    return v;
}

long scale_div(long v, long d) {
    v = v / d;
    return v;
}
