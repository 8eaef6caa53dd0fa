#ifndef CRX_H
#define CRX_H
#include <stdint.h>
#include <stddef.h>

struct CrxPlaneComp {
  uint64_t dataOffset;
  int32_t compNumber;
};

struct CrxTile {
  uint64_t dataOffset;
  uint64_t mdatQPDataSize;
  uint64_t mdatExtraSize;
  CrxPlaneComp *comps;
};

struct CrxImage {
  int32_t nPlanes;
  int32_t tileRows;
  int32_t tileCols;
  CrxTile *tiles;
  uint64_t mdatSize;
};

class LibRaw {
public:
  int open_buffer(const uint8_t *data, size_t size);
  int unpack();

protected:
  int crxSetupImageData(CrxImage *img, const uint8_t *hdr, size_t size);
  int crxDecodePlane(void *p, uint32_t planeNumber);
  void crxFreeImageData(CrxImage *img);
  int crxLoadRaw();

private:
  CrxImage image_;
  const uint8_t *buf_;
  size_t size_;
};

#endif
