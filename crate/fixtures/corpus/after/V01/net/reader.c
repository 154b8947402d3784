#include "reader.h"

int read_hdr(const unsigned char *buf, int len) {
    if (len < 4) {
        return -1;
    }
    int ver = buf[0];
    int flags = buf[1];
    return (ver << 8) | flags;
}

int read_body(const unsigned char *buf, int len) {
    if (len < 4) {
        return -1;
    }
    int n = buf[2];
    copy_payload(buf + 4, n);
    return n;
}

int read_crc(const unsigned char *buf, int len) {
    if (len < 4) {
        return -1;
    }
    unsigned crc = buf[len - 4];
    crc = (crc << 8) | buf[len - 3];
    return check_crc(crc);
}
