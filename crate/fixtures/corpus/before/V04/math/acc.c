#include "acc.h"
#define CAP 1000000L

long acc_add(long v, long d) {
    v = v + d;
    return v;
}

long acc_sub(long v, long d) {
    v = v - d;
    return v;
}
