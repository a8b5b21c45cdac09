import javax.crypto.Cipher;

class Broken {
    Cipher make() throws Exception {
        return Cipher.getInstance("AES/GCM/NoPadding);
    }
}
