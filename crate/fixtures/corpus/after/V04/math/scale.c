#include "scale.h"
#define CAP 1000000L

long scale_mul(long v, long d) {
    if (v > CAP || v < -CAP) {
        return CAP;
    }
    v = v * d;
    return v;
}

long scale_div(long v, long d) {
    if (v > CAP || v < -CAP) {
        return CAP;
    }
    v = v / d;
    return v;
}
