#include "name.h"

void copy_name(char *dst, const char *src) {
    int i = 0;
    while (src[i]) {
        dst[i] = src[i];
        i++;
    }
    dst[i] = 0;
}

struct entry *alloc_entry(int count) {
    int bytes = count * sizeof(struct entry);
    struct entry *e = pool_alloc(bytes);
    e->count = count;
    return e;
}
